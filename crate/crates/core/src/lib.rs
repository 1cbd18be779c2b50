pub mod analytics;
pub mod decode;
pub mod fixtures;
pub mod lm;
pub mod query;
pub mod report;
pub mod template;
pub mod token;
