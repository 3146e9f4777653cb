//! The tag tables, a legality check and the intelligibility flags on
//! hand-built transcripts.

use structind::protocol::{
    check_legal, classify_intelligibility, human_tag_options, machine_tag_options, Limits, Sender, SessionBuilder, Tag,
};

fn main() {
    let limits = Limits {
        retries: 2,
        messages: 4,
        reject_after: 2,
    };
    println!("match agree  machine            human@1   human@3");
    for (matches, agrees) in [(true, true), (true, false), (false, true), (false, false)] {
        let show = |tags: Vec<Tag>| tags.iter().map(|t| t.as_str()).collect::<Vec<_>>().join("|");
        println!(
            "{matches:<5} {agrees:<6} {:<18} {:<9} {}",
            show(machine_tag_options(matches, agrees).into_iter().collect()),
            show(
                human_tag_options(matches, agrees, 1, limits.reject_after)
                    .into_iter()
                    .collect()
            ),
            show(
                human_tag_options(matches, agrees, 3, limits.reject_after)
                    .into_iter()
                    .collect()
            ),
        );
    }

    let good = SessionBuilder::new("P1", limits)
        .init()
        .machine(Tag::Ratify, "x = load()", "loads the data")
        .human(Tag::Refute, "drop missing rows")
        .machine(Tag::Revise, "x = load().dropna()", "drops them")
        .human(Tag::Ratify, "")
        .finish();
    let flags = classify_intelligibility(&good).unwrap();
    println!(
        "\nlegal session: one-way human {}, one-way machine {}",
        flags.one_way_human, flags.one_way_machine
    );

    // REJECT on the first exchange is before the gate, and the machine may not reject at all.
    let bad = SessionBuilder::new("P1", limits)
        .init()
        .machine(Tag::Ratify, "x = 1", "")
        .human(Tag::Reject, "no")
        .raw(Sender::Machine, Tag::Reject)
        .build();
    for v in check_legal(&bad) {
        println!("violation: {v}");
    }
}
