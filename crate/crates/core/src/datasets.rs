//! Published tables used in examples and tests.

use crate::table::ContingencyTable;

/// 1973 Berkeley graduate admissions: sex (men, women) by admission
/// (denied, admitted) by department (six largest).
pub fn berkeley() -> ContingencyTable {
    let men_denied = [313.0, 207.0, 205.0, 279.0, 138.0, 351.0];
    let men_admitted = [512.0, 353.0, 120.0, 138.0, 53.0, 22.0];
    let women_denied = [19.0, 8.0, 391.0, 244.0, 299.0, 317.0];
    let women_admitted = [89.0, 17.0, 202.0, 131.0, 94.0, 24.0];
    let cells = [men_denied, men_admitted, women_denied, women_admitted].concat();
    ContingencyTable::from_dims(&[2, 2, 6], cells).expect("static table")
}

/// Mood's 2x2x2 example table (n = 836).
pub fn mood() -> ContingencyTable {
    let cells = vec![79.0, 73.0, 62.0, 168.0, 177.0, 81.0, 121.0, 75.0];
    ContingencyTable::from_dims(&[2, 2, 2], cells).expect("static table")
}

/// A 4x4x4 table in the Fienberg-Rinaldo family whose two-way margins fix
/// 36 cells (24 of them zero).
pub fn fienberg_rinaldo() -> ContingencyTable {
    let cells = [
        0, 4, 1, 1, 0, 0, 5, 5, 0, 0, 0, 3, 4, 2, 2, 2, //
        0, 5, 5, 0, 0, 0, 3, 0, 1, 5, 4, 2, 2, 2, 2, 0, //
        0, 5, 0, 0, 1, 6, 2, 2, 2, 5, 0, 4, 3, 2, 0, 0, //
        5, 1, 1, 1, 1, 0, 2, 0, 2, 0, 0, 3, 3, 0, 0, 0,
    ];
    ContingencyTable::from_dims(&[4, 4, 4], cells.iter().map(|&v| v as f64).collect())
        .expect("static table")
}

/// One-way margins of the three-variable 3x3x3 simulation example.
pub fn simulation_margins() -> Vec<Vec<f64>> {
    vec![vec![0.1, 0.3, 0.6], vec![0.2, 0.4, 0.4], vec![0.3, 0.3, 0.4]]
}

/// One-way margins of the 2x2x2 gamma example.
pub fn gamma_margins_2x2x2() -> Vec<Vec<f64>> {
    vec![vec![0.2, 0.8], vec![0.4, 0.6], vec![0.5, 0.5]]
}
