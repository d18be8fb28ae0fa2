//! Explanations, template feedback, schema mentions and negative feedback.

mod explain;
mod mentions;
pub mod nl;
mod template;

pub use explain::{explain, Explanation, StepKind, StepRef};
pub use mentions::{
    match_schema_mentions, match_schema_mentions_with, sample_negative, MentionSpan, NegativeError, SchemaItem,
    MATCH_THRESHOLD,
};
pub use template::{
    template_feedback, template_feedback_with, Span, SpanClass, SpanPattern, TemplateError, TemplateFeedback,
    TemplateInventory,
};
