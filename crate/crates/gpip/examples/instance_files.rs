//! The on-disk formats: write a GPIP instance as JSON, read it back,
//! normalize it, and dump its LP relaxation as plain text.
//!
//!     cargo run --example instance_files

use gpip::lp::{relax, write_lp_text};
use gpip::matrix::Matrix;
use gpip::model::{normalize, validate, RawInstance};

fn main() -> gpip::Result<()> {
    let mut raw = RawInstance {
        name: Some("files-demo".into()),
        coupling_x: Matrix::from_rows(vec![vec![2.0, 1.0]]).unwrap(),
        coupling_y: Matrix::from_rows(vec![vec![3.0]]).unwrap(),
        packing_x: Matrix::from_rows(vec![vec![1.0, 4.0]]).unwrap(),
        packing_x_rhs: vec![8.0],
        packing_y: Matrix::from_rows(vec![vec![0.5]]).unwrap(),
        packing_y_rhs: vec![2.0],
        objective_x: vec![3.0, 1.5],
        objective_y: vec![2.0],
    };
    raw.check_dims()?;

    let text = serde_json::to_string_pretty(&raw).expect("instances serialize");
    println!("--- instance JSON ---\n{text}\n");

    let parsed: RawInstance = serde_json::from_str(&text).expect("round-trips");
    let (instance, record) = normalize(&parsed)?;
    let report = validate(&instance);
    println!(
        "normalized: ok = {}, objective scale {}, notes {:?}\n",
        report.ok, record.objective_scale, report.notes
    );

    println!("--- LP relaxation dump ---\n{}", write_lp_text(&relax(&instance)));
    Ok(())
}
