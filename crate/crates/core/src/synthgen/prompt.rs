use crate::corpus::ClassId;

use super::GenError;

/// Default zero-shot prompt. `{numbered_examples}` renders `1. text` lines.
pub const DEFAULT_TEMPLATE: &str = "You are helping to build training data for a text classifier.\n\
Class: {class}\n\
Here are example messages that belong to this class:\n\
{numbered_examples}\n\
Write {count} new, varied messages that also belong to the class \"{class}\". \
Separate the messages with a blank line and do not number them.";

/// Substitutes `{class}`, `{count}` and `{examples}` (one per line) or
/// `{numbered_examples}`. The template must contain `{count}` and one of the
/// example placeholders.
pub fn build_prompt(class: &ClassId, example_texts: &[String], count: usize, template: &str) -> Result<String, GenError> {
    if template.is_empty() {
        return Err(GenError::Template("template is empty".into()));
    }
    if !template.contains("{count}") {
        return Err(GenError::Template("missing {count} placeholder".into()));
    }
    if !template.contains("{examples}") && !template.contains("{numbered_examples}") {
        return Err(GenError::Template("missing {examples} placeholder".into()));
    }
    let one_line = |t: &String| t.replace(['\n', '\r'], " ");
    let plain: Vec<String> = example_texts.iter().map(one_line).collect();
    let numbered: Vec<String> = plain.iter().enumerate().map(|(i, t)| format!("{}. {t}", i + 1)).collect();
    Ok(template
        .replace("{numbered_examples}", &numbered.join("\n"))
        .replace("{examples}", &plain.join("\n"))
        .replace("{count}", &count.to_string())
        .replace("{class}", class.as_str()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simple_template() {
        let p = build_prompt(&"A".into(), &["hi".into()], 3, "Gen {count} like: {examples}").unwrap();
        assert_eq!(p, "Gen 3 like: hi");
    }

    #[test]
    fn empty_template_rejected() {
        assert!(matches!(build_prompt(&"A".into(), &["hi".into()], 3, ""), Err(GenError::Template(_))));
        assert!(matches!(
            build_prompt(&"A".into(), &["hi".into()], 3, "no placeholders"),
            Err(GenError::Template(_))
        ));
    }

    #[test]
    fn default_template_numbers_examples() {
        let p = build_prompt(&"T7".into(), &["printer broken".into(), "no toner".into()], 20, DEFAULT_TEMPLATE).unwrap();
        assert!(p.contains("Class: T7"));
        assert!(p.contains("1. printer broken\n2. no toner"));
        assert!(p.contains("Write 20 new"));
        assert!(!p.contains('{'));
    }
}
