//! Stage prompt templates (shipped as text assets) and their substitution.

pub const INITIAL_REASONING: &str = include_str!("../../assets/prompts/initial_reasoning.txt");
pub const VERIFICATION: &str = include_str!("../../assets/prompts/verification.txt");
pub const GENDER_FILTERING: &str = include_str!("../../assets/prompts/gender_filtering.txt");
pub const ITERATIVE_REFINEMENT: &str = include_str!("../../assets/prompts/iterative_refinement.txt");
pub const SYSTEM_PREFACE: &str = include_str!("../../assets/prompts/system_preface.txt");

/// Replaces `{name}` placeholders in one left-to-right pass, so substituted
/// values are never themselves re-expanded.
pub fn fill(template: &str, values: &[(&str, &str)]) -> String {
    let mut out = String::with_capacity(template.len() + 256);
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let after = &rest[open + 1..];
        let hit = after.find('}').and_then(|close| {
            let name = &after[..close];
            values
                .iter()
                .find(|(k, _)| *k == name)
                .map(|(_, v)| (close, *v))
        });
        match hit {
            Some((close, value)) => {
                out.push_str(value);
                rest = &after[close + 1..];
            }
            None => {
                out.push('{');
                rest = after;
            }
        }
    }
    out.push_str(rest);
    out
}

pub fn initial_prompt(question: &str, text: &str, answer: &str) -> String {
    fill(
        INITIAL_REASONING,
        &[("question", question), ("text", text), ("answer", answer)],
    )
}

pub fn verification_prompt(question: &str, text: &str, answer: &str, reasoning: &str) -> String {
    fill(
        VERIFICATION,
        &[
            ("question", question),
            ("text", text),
            ("answer", answer),
            ("reasoning", reasoning),
        ],
    )
}

pub fn filtering_prompt(question: &str, text: &str, reasoning: &str) -> String {
    fill(
        GENDER_FILTERING,
        &[("question", question), ("text", text), ("reasoning", reasoning)],
    )
}

pub fn refinement_prompt(question: &str, text: &str, reasoning: &str) -> String {
    fill(
        ITERATIVE_REFINEMENT,
        &[("question", question), ("text", text), ("reasoning", reasoning)],
    )
}

/// One member block of the system prompt.
pub fn member_block(question: &str, text: &str, reasoning: &str, answer: &str) -> String {
    format!("question: {question}\ntext: {text}\nreasoning: {reasoning}\nanswer: {answer}")
}

/// Preface, newline, then member blocks separated by a blank line.
pub fn render_blocks<'a>(blocks: impl IntoIterator<Item = &'a str>) -> String {
    let body: Vec<&str> = blocks.into_iter().collect();
    format!("{SYSTEM_PREFACE}\n{}", body.join("\n\n"))
}
