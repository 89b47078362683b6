pub mod asom;
pub mod config;
pub mod encoding;
pub mod induction;
pub mod kb;
pub mod pipeline;
pub mod som;
pub mod space;
pub mod svg;
pub mod validator;
