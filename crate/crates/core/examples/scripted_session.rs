//! One process, a scripted model and a scripted human. Prints the
//! transcript as it is stored on disk.

use structind::agent::{Policy, ScriptedHuman};
use structind::dfd::{Background, Dfd, ProcessSpec, Vertex};
use structind::engine::{Engine, RunConfig};
use structind::llm::ScriptedLlm;
use structind::protocol::encode_session;

fn main() {
    let dfd = Dfd {
        vertices: vec![Vertex::process(
            "P1",
            ProcessSpec::new(
                "Sum the numbers in data/numbers.txt",
                "the file exists",
                "the sum is printed",
            ),
        )],
        edges: vec![],
    };
    let background = Background::new(dfd, "Add up a column of numbers.");

    let mut llm = ScriptedLlm::sequence([
        "Read and sum.\n\n```python\nprint(sum(open('data/numbers.txt')))\n```\n",
        "Lines are strings, so convert first.\n\n```python\nprint(sum(map(int, open('data/numbers.txt'))))\n```\n",
    ]);
    // Refute the first proposal, ratify the second.
    let mut human = ScriptedHuman::uniform(Policy::ratify_after(1));

    let state = Engine::new(&mut llm, &mut human)
        .execute(&background, &RunConfig::default())
        .expect("run");
    print!("{}", encode_session(&state.sessions[0]));
    println!("---");
    println!("{}", state.assembled_program().as_str().unwrap_or(""));
}
