use super::{
    Atom, Clause, ConstantStyle, KbError, LabeledExample, ParsedProgram, Polarity, Term,
};

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Ident(String),
    Var(String),
    Quoted(String),
    LParen,
    RParen,
    Comma,
    Dot,
    Neck,
    Plus,
    Minus,
    Eof,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("identifier `{s}`"),
            Tok::Var(s) => format!("variable `?{s}`"),
            Tok::Quoted(s) => format!("quoted constant '{s}'"),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::Comma => "`,`".into(),
            Tok::Dot => "`.`".into(),
            Tok::Neck => "`:-`".into(),
            Tok::Plus => "`+`".into(),
            Tok::Minus => "`-`".into(),
            Tok::Eof => "end of input".into(),
        }
    }
}

#[derive(Clone, Debug)]
struct Spanned {
    tok: Tok,
    line: usize,
    column: usize,
}

struct Lexer<'a> {
    chars: std::iter::Peekable<std::str::Chars<'a>>,
    line: usize,
    column: usize,
}

impl<'a> Lexer<'a> {
    fn new(text: &'a str) -> Self {
        Lexer {
            chars: text.chars().peekable(),
            line: 1,
            column: 1,
        }
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.chars.next()?;
        if c == '\n' {
            self.line += 1;
            self.column = 1;
        } else {
            self.column += 1;
        }
        Some(c)
    }

    fn error(&self, line: usize, column: usize, expected: &str, found: String) -> KbError {
        KbError::Syntax {
            line,
            column,
            expected: expected.to_string(),
            found,
        }
    }

    fn skip_trivia(&mut self) {
        while let Some(&c) = self.chars.peek() {
            if c.is_whitespace() {
                self.bump();
            } else if c == '%' {
                while let Some(&c) = self.chars.peek() {
                    if c == '\n' {
                        break;
                    }
                    self.bump();
                }
            } else {
                break;
            }
        }
    }

    fn ident_tail(&mut self, first: char) -> String {
        let mut s = String::from(first);
        while let Some(&c) = self.chars.peek() {
            if c.is_ascii_alphanumeric() || c == '_' {
                s.push(c);
                self.bump();
            } else {
                break;
            }
        }
        s
    }

    fn next_token(&mut self) -> Result<Spanned, KbError> {
        self.skip_trivia();
        let (line, column) = (self.line, self.column);
        let Some(c) = self.bump() else {
            return Ok(Spanned {
                tok: Tok::Eof,
                line,
                column,
            });
        };
        let tok = match c {
            '(' => Tok::LParen,
            ')' => Tok::RParen,
            ',' => Tok::Comma,
            '.' => Tok::Dot,
            '+' => Tok::Plus,
            '-' => Tok::Minus,
            ':' => match self.bump() {
                Some('-') => Tok::Neck,
                other => {
                    return Err(self.error(
                        line,
                        column,
                        "`:-`",
                        other.map_or("end of input".into(), |c| format!("`:{c}`")),
                    ))
                }
            },
            '?' => match self.chars.peek().copied() {
                Some(c) if c.is_ascii_alphabetic() || c == '_' => {
                    self.bump();
                    Tok::Var(self.ident_tail(c))
                }
                other => {
                    return Err(self.error(
                        self.line,
                        self.column,
                        "variable name after `?`",
                        other.map_or("end of input".into(), |c| format!("`{c}`")),
                    ))
                }
            },
            '\'' => {
                let mut s = String::new();
                loop {
                    match self.bump() {
                        None => {
                            return Err(self.error(
                                self.line,
                                self.column,
                                "closing `'`",
                                "end of input".into(),
                            ))
                        }
                        Some('\'') => break,
                        Some('\\') => match self.bump() {
                            Some('n') => s.push('\n'),
                            Some(e @ ('\\' | '\'')) => s.push(e),
                            other => {
                                return Err(self.error(
                                    self.line,
                                    self.column,
                                    "escape sequence (\\\\, \\', \\n)",
                                    other.map_or("end of input".into(), |c| format!("`\\{c}`")),
                                ))
                            }
                        },
                        Some(c) => s.push(c),
                    }
                }
                Tok::Quoted(s)
            }
            c if c.is_ascii_alphanumeric() || c == '_' => Tok::Ident(self.ident_tail(c)),
            other => {
                return Err(self.error(line, column, "a token", format!("`{other}`")));
            }
        };
        Ok(Spanned { tok, line, column })
    }
}

struct Parser<'a> {
    lexer: Lexer<'a>,
    peeked: Option<Spanned>,
    style: ConstantStyle,
}

impl<'a> Parser<'a> {
    fn new(text: &'a str, style: ConstantStyle) -> Self {
        Parser {
            lexer: Lexer::new(text),
            peeked: None,
            style,
        }
    }

    fn peek(&mut self) -> Result<&Spanned, KbError> {
        if self.peeked.is_none() {
            self.peeked = Some(self.lexer.next_token()?);
        }
        Ok(self.peeked.as_ref().expect("peeked token"))
    }

    fn next(&mut self) -> Result<Spanned, KbError> {
        match self.peeked.take() {
            Some(t) => Ok(t),
            None => self.lexer.next_token(),
        }
    }

    fn unexpected(tok: &Spanned, expected: &str) -> KbError {
        KbError::Syntax {
            line: tok.line,
            column: tok.column,
            expected: expected.to_string(),
            found: tok.tok.describe(),
        }
    }

    fn expect(&mut self, want: Tok, expected: &str) -> Result<Spanned, KbError> {
        let t = self.next()?;
        if t.tok == want {
            Ok(t)
        } else {
            Err(Self::unexpected(&t, expected))
        }
    }

    fn term(&mut self) -> Result<Term, KbError> {
        let t = self.next()?;
        match t.tok {
            Tok::Var(v) => Ok(Term::Var(v)),
            Tok::Quoted(q) => Ok(Term::Const(q)),
            Tok::Ident(id) => {
                let is_var = self.style == ConstantStyle::Prolog
                    && id
                        .chars()
                        .next()
                        .is_some_and(|c| c.is_ascii_uppercase() || c == '_');
                Ok(if is_var { Term::Var(id) } else { Term::Const(id) })
            }
            _ => Err(Self::unexpected(&t, "a term (constant or variable)")),
        }
    }

    /// Returns the atom together with the position of its predicate token.
    fn atom(&mut self) -> Result<(Atom, usize, usize), KbError> {
        let t = self.next()?;
        let predicate = match &t.tok {
            Tok::Ident(id) if id.chars().next().is_some_and(|c| c.is_ascii_lowercase()) => {
                id.clone()
            }
            _ => return Err(Self::unexpected(&t, "predicate name (lowercase identifier)")),
        };
        self.expect(Tok::LParen, "`(`")?;
        let mut args = vec![self.term()?];
        loop {
            let t = self.next()?;
            match t.tok {
                Tok::Comma => args.push(self.term()?),
                Tok::RParen => break,
                _ => return Err(Self::unexpected(&t, "`,` or `)`")),
            }
        }
        Ok((Atom { predicate, args }, t.line, t.column))
    }

    fn at_eof(&mut self) -> Result<bool, KbError> {
        Ok(self.peek()?.tok == Tok::Eof)
    }

    fn program(&mut self) -> Result<ParsedProgram, KbError> {
        let mut program = ParsedProgram::default();
        while !self.at_eof()? {
            let (head, line, column) = self.atom()?;
            let t = self.next()?;
            match t.tok {
                Tok::Dot => match head.to_ground() {
                    Some(fact) => program.facts.push(fact),
                    None => return Err(KbError::NonGroundFact { line, column }),
                },
                Tok::Neck => {
                    let mut body = vec![self.atom()?.0];
                    loop {
                        let t = self.next()?;
                        match t.tok {
                            Tok::Comma => body.push(self.atom()?.0),
                            Tok::Dot => break,
                            _ => return Err(Self::unexpected(&t, "`,` or `.`")),
                        }
                    }
                    program.rules.push(Clause { head, body });
                }
                _ => return Err(Self::unexpected(&t, "`.` or `:-`")),
            }
        }
        Ok(program)
    }

    fn examples(&mut self) -> Result<Vec<LabeledExample>, KbError> {
        let mut out = Vec::new();
        while !self.at_eof()? {
            let t = self.next()?;
            let polarity = match t.tok {
                Tok::Plus => Polarity::Positive,
                Tok::Minus => Polarity::Negative,
                _ => return Err(Self::unexpected(&t, "`+` or `-`")),
            };
            let (atom, line, column) = self.atom()?;
            self.expect(Tok::Dot, "`.`")?;
            let atom = atom
                .to_ground()
                .ok_or(KbError::NonGroundExample { line, column })?;
            out.push(LabeledExample { polarity, atom });
        }
        Ok(out)
    }
}

/// Parses a knowledge base using the default [`ConstantStyle::Capitalized`] convention.
pub fn parse_kb(text: &str) -> Result<ParsedProgram, KbError> {
    parse_kb_with(text, ConstantStyle::default())
}

pub fn parse_kb_with(text: &str, style: ConstantStyle) -> Result<ParsedProgram, KbError> {
    Parser::new(text, style).program()
}

/// Parses an examples file: one `+atom.` or `-atom.` per entry.
pub fn parse_examples(text: &str) -> Result<Vec<LabeledExample>, KbError> {
    parse_examples_with(text, ConstantStyle::default())
}

pub fn parse_examples_with(
    text: &str,
    style: ConstantStyle,
) -> Result<Vec<LabeledExample>, KbError> {
    Parser::new(text, style).examples()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kb::GroundAtom;

    #[test]
    fn single_fact() {
        let p = parse_kb("father(jake, bill).").unwrap();
        assert_eq!(p.facts, vec![GroundAtom::new("father", ["jake", "bill"])]);
        assert!(p.rules.is_empty());
    }

    #[test]
    fn empty_input() {
        assert_eq!(parse_kb("").unwrap(), ParsedProgram::default());
        assert_eq!(parse_kb("  % only a comment\n\n").unwrap(), ParsedProgram::default());
    }

    #[test]
    fn prolog_rule() {
        let p = parse_kb_with("ancestor(X,Y) :- father(X,Y).", ConstantStyle::Prolog).unwrap();
        assert!(p.facts.is_empty());
        assert_eq!(p.rules.len(), 1);
        let r = &p.rules[0];
        let xy = vec![Term::Var("X".into()), Term::Var("Y".into())];
        assert_eq!(r.head, Atom::new("ancestor", xy.clone()));
        assert_eq!(r.body, vec![Atom::new("father", xy)]);
    }

    #[test]
    fn capitalized_constants_and_marked_variables() {
        let p = parse_kb("father(Jake, Bill).\nancestor(?X, ?Y) :- father(?X, ?Y).").unwrap();
        assert_eq!(p.facts[0].args, vec!["Jake", "Bill"]);
        assert!(p.rules[0].head.args.iter().all(Term::is_var));
    }

    #[test]
    fn capitalized_identifier_without_marker_is_not_a_variable() {
        // In capitalized mode `X` is a constant, so the unit clause is ground.
        let p = parse_kb("p(X).").unwrap();
        assert_eq!(p.facts[0].args, vec!["X"]);
    }

    #[test]
    fn comments_and_quotes() {
        let p = parse_kb("% header\np('New York', x). % trailing\n").unwrap();
        assert_eq!(p.facts[0].args, vec!["New York", "x"]);
    }

    #[test]
    fn syntax_error_position() {
        let err = parse_kb("father(jake, bill)\nmother(a, b).").unwrap_err();
        match err {
            KbError::Syntax {
                line,
                column,
                expected,
                ..
            } => {
                assert_eq!((line, column), (2, 1));
                assert!(expected.contains('.'));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rejects_zero_arity_and_bad_predicates() {
        assert!(matches!(parse_kb("p()."), Err(KbError::Syntax { .. })));
        assert!(matches!(parse_kb("Father(a)."), Err(KbError::Syntax { .. })));
        assert!(matches!(parse_kb("p(a) :- ."), Err(KbError::Syntax { .. })));
        assert!(matches!(parse_kb("p(a) : q(a)."), Err(KbError::Syntax { .. })));
        assert!(matches!(parse_kb("p('a)."), Err(KbError::Syntax { .. })));
    }

    #[test]
    fn non_ground_fact() {
        assert_eq!(
            parse_kb_with("p(a).\np(X).", ConstantStyle::Prolog),
            Err(KbError::NonGroundFact { line: 2, column: 1 })
        );
    }

    #[test]
    fn examples_file() {
        let ex = parse_examples("+ancestor(jake, john).\n-ancestor(ted, jake).\n").unwrap();
        assert_eq!(
            ex,
            vec![
                LabeledExample::positive(GroundAtom::new("ancestor", ["jake", "john"])),
                LabeledExample::negative(GroundAtom::new("ancestor", ["ted", "jake"])),
            ]
        );
    }

    #[test]
    fn non_ground_example() {
        assert!(matches!(
            parse_examples("+p(?X)."),
            Err(KbError::NonGroundExample { .. })
        ));
        assert!(matches!(
            parse_examples_with("+p(X).", ConstantStyle::Prolog),
            Err(KbError::NonGroundExample { .. })
        ));
    }

    #[test]
    fn example_without_sign() {
        assert!(matches!(parse_examples("p(a)."), Err(KbError::Syntax { .. })));
    }

    #[test]
    fn duplicates_are_kept() {
        let p = parse_kb("p(a). p(a). q(b).").unwrap();
        assert_eq!(p.facts.len(), 3);
        assert_eq!(p.duplicate_facts(), vec![1]);
    }
}
