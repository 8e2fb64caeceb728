//! One protocol session against an in-memory builtin runner, showing the
//! exact frames on the wire.

use std::io::Cursor;

use commbench::hpo::Params;
use commbench::runner::{read_message, serve_builtin, write_message, Builtin, Message, TrainRequest};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dataset = concat!(env!("CARGO_MANIFEST_DIR"), "/data/karate");
    let mut input = Vec::new();
    write_message(&mut input, &Message::Hello { protocol: 1, name: "example".into() })?;
    write_message(
        &mut input,
        &Message::Train(TrainRequest {
            dataset_path: dataset.into(),
            params: Params::new(),
            seed: 42,
            max_epochs: 100,
            patience: 10,
            k: 2,
            train_nodes: (0..20).collect(),
            val_nodes: (20..27).collect(),
        }),
    )?;
    println!("harness sends:\n{}\n", String::from_utf8_lossy(&input[..60.min(input.len())]));

    let mut output = Vec::new();
    serve_builtin(Builtin::LabelPropagation, None, Cursor::new(input), &mut output)?;
    let mut reader = Cursor::new(output);
    while let Some(message) = read_message(&mut reader)? {
        println!("runner replies {}: {}", message.kind(), serde_json::to_string(&message)?);
    }
    Ok(())
}
