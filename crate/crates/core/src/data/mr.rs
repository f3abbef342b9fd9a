use std::collections::HashSet;
use std::path::Path;

use super::{tokenize, DataError, TokenSequence};

/// One slot of a meaning representation: a name and a value. Boolean slots
/// carry the value "yes" or "no".
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SlotPair {
    pub name: String,
    pub value: String,
    pub is_boolean: bool,
}

impl SlotPair {
    /// Builds a slot pair; `is_boolean` is set iff the value is exactly
    /// "yes" or "no".
    pub fn new(name: impl Into<String>, value: impl Into<String>) -> Result<Self, DataError> {
        let name = name.into();
        let value = value.into();
        if name.is_empty() {
            return Err(DataError::Validation("slot name is empty".into()));
        }
        if value.is_empty() {
            return Err(DataError::Validation(format!("slot '{name}' has empty value")));
        }
        let is_boolean = value == "yes" || value == "no";
        Ok(SlotPair { name, value, is_boolean })
    }
}

/// The structured input at inference time: an ordered list of slot pairs
/// with unique names.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MeaningRepresentation {
    pub slots: Vec<SlotPair>,
}

impl MeaningRepresentation {
    pub fn new(slots: Vec<SlotPair>) -> Result<Self, DataError> {
        let mut seen = HashSet::new();
        for slot in &slots {
            if !seen.insert(slot.name.clone()) {
                return Err(DataError::DuplicateSlot(slot.name.clone()));
            }
        }
        Ok(MeaningRepresentation { slots })
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }
}

/// A meaning representation paired with at least one reference sentence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledExample {
    pub mr: MeaningRepresentation,
    pub references: Vec<TokenSequence>,
}

/// Parses the bracket syntax `name[value], name[value], ...` into a
/// meaning representation. Errors carry the character offset of the
/// offending position.
pub fn parse_mr(line: &str) -> Result<MeaningRepresentation, DataError> {
    if line.trim().is_empty() {
        return Err(DataError::Parse {
            offset: 0,
            message: "empty meaning representation".into(),
        });
    }
    let chars: Vec<char> = line.chars().collect();
    let mut pos = 0usize;
    let mut slots = Vec::new();
    loop {
        while pos < chars.len() && chars[pos].is_whitespace() {
            pos += 1;
        }
        let name_start = pos;
        while pos < chars.len() && chars[pos] != '[' && chars[pos] != ']' && chars[pos] != ',' {
            pos += 1;
        }
        if pos == chars.len() || chars[pos] != '[' {
            return Err(DataError::Parse {
                offset: pos,
                message: "expected '[' after slot name".into(),
            });
        }
        let name: String = chars[name_start..pos].iter().collect::<String>().trim().to_owned();
        if name.is_empty() {
            return Err(DataError::Parse {
                offset: name_start,
                message: "empty slot name".into(),
            });
        }
        pos += 1; // consume '['
        let value_start = pos;
        while pos < chars.len() && chars[pos] != ']' {
            pos += 1;
        }
        if pos == chars.len() {
            return Err(DataError::Parse {
                offset: value_start,
                message: format!("unterminated value for slot '{name}'"),
            });
        }
        let value: String = chars[value_start..pos].iter().collect::<String>().trim().to_owned();
        if value.is_empty() {
            return Err(DataError::Parse {
                offset: value_start,
                message: format!("empty value for slot '{name}'"),
            });
        }
        pos += 1; // consume ']'
        slots.push(SlotPair::new(name, value)?);
        while pos < chars.len() && chars[pos].is_whitespace() {
            pos += 1;
        }
        if pos == chars.len() {
            break;
        }
        if chars[pos] != ',' {
            return Err(DataError::Parse {
                offset: pos,
                message: format!("expected ',' between slots, found '{}'", chars[pos]),
            });
        }
        pos += 1; // consume ','
    }
    MeaningRepresentation::new(slots)
}

/// Reads a labeled CSV with header `mr,ref`. Rows sharing the same `mr`
/// string are grouped into one example with multiple references (order of
/// first appearance is kept). References are tokenized with the corpus
/// tokenizer.
pub fn read_labeled_csv(path: &Path) -> Result<Vec<LabeledExample>, DataError> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_path(path)?;
    let headers = reader.headers()?.clone();
    let mr_ix = headers
        .iter()
        .position(|h| h.trim() == "mr")
        .ok_or_else(|| DataError::Format("labeled CSV is missing an 'mr' column".into()))?;
    let ref_ix = headers
        .iter()
        .position(|h| h.trim() == "ref")
        .ok_or_else(|| DataError::Format("labeled CSV is missing a 'ref' column".into()))?;

    let mut order: Vec<String> = Vec::new();
    let mut groups: std::collections::HashMap<String, Vec<TokenSequence>> =
        std::collections::HashMap::new();
    for record in reader.records() {
        let record = record?;
        let mr_field = record
            .get(mr_ix)
            .ok_or_else(|| DataError::Format("short CSV record".into()))?
            .to_owned();
        let ref_field = record
            .get(ref_ix)
            .ok_or_else(|| DataError::Format("short CSV record".into()))?;
        let reference = tokenize(ref_field);
        if reference.is_empty() {
            return Err(DataError::Validation(format!("empty reference for mr '{mr_field}'")));
        }
        if !groups.contains_key(&mr_field) {
            order.push(mr_field.clone());
        }
        groups.entry(mr_field).or_default().push(reference);
    }
    order
        .into_iter()
        .map(|mr_field| {
            let references = groups.remove(&mr_field).expect("group exists");
            Ok(LabeledExample { mr: parse_mr(&mr_field)?, references })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_four_slots() {
        let mr =
            parse_mr("name[Loch Fyne], eatType[restaurant], food[Indian], familyFriendly[yes]")
                .unwrap();
        assert_eq!(mr.slots.len(), 4);
        assert_eq!(mr.slots[0].name, "name");
        assert_eq!(mr.slots[0].value, "Loch Fyne");
        assert!(!mr.slots[0].is_boolean);
        assert_eq!(mr.slots[3].name, "familyFriendly");
        assert!(mr.slots[3].is_boolean);
    }

    #[test]
    fn parses_two_slots() {
        let mr = parse_mr("name[Aromi], familyFriendly[yes]").unwrap();
        assert_eq!(mr.slots.len(), 2);
        assert!(mr.slots[1].is_boolean);
    }

    #[test]
    fn rejects_duplicate_slot_names() {
        let err = parse_mr("name[A], name[B]").unwrap_err();
        assert!(matches!(err, DataError::DuplicateSlot(ref n) if n == "name"));
    }

    #[test]
    fn reports_offset_on_malformed_input() {
        let err = parse_mr("name[A], eatType restaurant").unwrap_err();
        match err {
            DataError::Parse { offset, .. } => assert_eq!(offset, 27),
            other => panic!("unexpected error: {other}"),
        }
    }

    #[test]
    fn rejects_unterminated_value() {
        assert!(matches!(parse_mr("name[A"), Err(DataError::Parse { .. })));
    }

    #[test]
    fn slot_names_may_contain_spaces() {
        let mr = parse_mr("customer rating[5 out of 5], name[Aromi]").unwrap();
        assert_eq!(mr.slots[0].name, "customer rating");
        assert_eq!(mr.slots[0].value, "5 out of 5");
    }

    #[test]
    fn boolean_detection_only_for_yes_no() {
        let slot = SlotPair::new("food", "yes").unwrap();
        assert!(slot.is_boolean);
        let slot = SlotPair::new("food", "Indian").unwrap();
        assert!(!slot.is_boolean);
    }

    #[test]
    fn reads_and_groups_labeled_csv() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("labeled.csv");
        std::fs::write(
            &path,
            "mr,ref\n\
             \"name[Aromi], familyFriendly[yes]\",Aromi is family friendly.\n\
             \"name[Aromi], familyFriendly[yes]\",\"Aromi, a family place.\"\n\
             name[Wildwood],Wildwood is a pub.\n",
        )
        .unwrap();
        let examples = read_labeled_csv(&path).unwrap();
        assert_eq!(examples.len(), 2);
        assert_eq!(examples[0].references.len(), 2);
        assert_eq!(examples[1].references.len(), 1);
        assert_eq!(examples[0].mr.slots[0].value, "Aromi");
        assert_eq!(
            examples[0].references[0],
            vec!["Aromi", "is", "family", "friendly", "."].into()
        );
    }
}
