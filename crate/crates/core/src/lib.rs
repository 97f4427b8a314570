pub mod clock;
pub mod diagram;
pub mod flatten;
pub mod llm;
pub mod orchestrate;
pub mod prompt;
pub mod report;
pub mod template;
