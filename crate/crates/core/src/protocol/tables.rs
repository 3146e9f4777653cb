//! Tag decision tables: which tags an agent may send given its Match (about
//! the program received) and Agree (about the explanation received)
//! judgments.

use std::collections::BTreeSet;

use super::Tag;

pub type TagSet = BTreeSet<Tag>;

/// Human table. `REJECT` is only on offer in the ¬Match/¬Agree cell and only
/// once the exchange number `index` has passed the gate `m`.
pub fn human_tag_options(matches: bool, agrees: bool, index: u32, m: u32) -> TagSet {
    match (matches, agrees) {
        (true, true) => [Tag::Ratify].into(),
        (true, false) | (false, true) => [Tag::Refute].into(),
        (false, false) if index > m => [Tag::Refute, Tag::Reject].into(),
        (false, false) => [Tag::Refute].into(),
    }
}

/// Machine table. The machine never sends `REJECT`.
pub fn machine_tag_options(matches: bool, agrees: bool) -> TagSet {
    match (matches, agrees) {
        (true, true) => [Tag::Ratify].into(),
        (true, false) | (false, true) => [Tag::Refute, Tag::Revise].into(),
        (false, false) => [Tag::Refute].into(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn human_cells() {
        assert_eq!(human_tag_options(true, true, 3, 6), [Tag::Ratify].into());
        assert_eq!(human_tag_options(false, false, 7, 6), [Tag::Refute, Tag::Reject].into());
        assert_eq!(human_tag_options(false, false, 2, 6), [Tag::Refute].into());
        assert_eq!(human_tag_options(false, false, 6, 6), [Tag::Refute].into());
    }

    #[test]
    fn machine_cells() {
        assert_eq!(machine_tag_options(true, true), [Tag::Ratify].into());
        assert_eq!(machine_tag_options(true, false), [Tag::Refute, Tag::Revise].into());
        assert_eq!(machine_tag_options(false, false), [Tag::Refute].into());
    }

    #[test]
    fn asymmetry_holds_everywhere() {
        for matches in [false, true] {
            for agrees in [false, true] {
                assert!(!machine_tag_options(matches, agrees).contains(&Tag::Reject));
                for index in 0..20 {
                    for m in 0..12 {
                        let opts = human_tag_options(matches, agrees, index, m);
                        assert!(!opts.contains(&Tag::Revise));
                        assert_eq!(opts.contains(&Tag::Ratify), matches && agrees);
                        if opts.contains(&Tag::Reject) {
                            assert!(index > m);
                        }
                    }
                }
            }
        }
    }
}
