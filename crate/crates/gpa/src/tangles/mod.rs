//! Planar tangles in sweep form, their text syntax, and the state-sum action on loops.
//!
//! A tangle is read bottom to top. It starts with no strings and ends with its
//! 2n boundary strings pointing up; the loop on the output is read from left to
//! right. An input box likewise sends all 2nᵢ of its strings up, read left to
//! right from its starred region. Cup `p` opens a new pair at gap `p`; cap `p`
//! closes strings `p` and `p+1`; box `i` at `p` places input `i` at gap `p`.

mod eval;
mod parser;

use std::fmt;

use thiserror::Error;

use crate::loopspace::{Grade, Sign};

pub use eval::{evaluate, evaluate_counted, Evaluation};
pub use parser::parse_tangle;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Row {
    Cup(usize),
    Cap(usize),
    Box { input: usize, at: usize },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Tangle {
    boundary: Grade,
    inputs: Vec<Grade>,
    rows: Vec<Row>,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TangleError {
    #[error("{line}:{col}: {msg}")]
    Syntax { line: usize, col: usize, msg: String },
    #[error("row {row}: {msg}")]
    Bookkeeping { row: usize, msg: String },
    #[error("input {0}: {1}")]
    Signature(usize, String),
}

impl Tangle {
    /// Check string bookkeeping, shading and box usage.
    pub fn new(boundary: Grade, inputs: Vec<Grade>, rows: Vec<Row>) -> Result<Self, TangleError> {
        let mut count = 0usize;
        let mut used = vec![false; inputs.len()];
        for (i, row) in rows.iter().enumerate() {
            let err = |msg: String| TangleError::Bookkeeping { row: i + 1, msg };
            match *row {
                Row::Cup(p) => {
                    if p > count {
                        return Err(err(format!("cup at gap {p} but only {count} strings")));
                    }
                    count += 2;
                }
                Row::Cap(p) => {
                    if p + 1 >= count {
                        return Err(err(format!("cap {p} needs strings {p} and {} but only {count} present", p + 1)));
                    }
                    count -= 2;
                }
                Row::Box { input, at } => {
                    let g = *inputs
                        .get(input)
                        .ok_or_else(|| err(format!("no input {input}")))?;
                    if used[input] {
                        return Err(err(format!("input {input} placed twice")));
                    }
                    used[input] = true;
                    if at > count {
                        return Err(err(format!("box at gap {at} but only {count} strings")));
                    }
                    if region_sign(boundary.sign, at) != g.sign {
                        return Err(err(format!(
                            "input {input} of sign {} sits in a region of the other shading",
                            g.sign.symbol()
                        )));
                    }
                    count += 2 * g.n;
                }
            }
        }
        if let Some(i) = used.iter().position(|u| !u) {
            return Err(TangleError::Signature(i, "declared but never placed".into()));
        }
        if count != 2 * boundary.n {
            return Err(TangleError::Bookkeeping {
                row: rows.len(),
                msg: format!("ends with {count} strings, boundary needs {}", 2 * boundary.n),
            });
        }
        Ok(Tangle {
            boundary,
            inputs,
            rows,
        })
    }

    pub fn boundary(&self) -> Grade {
        self.boundary
    }

    pub fn inputs(&self) -> &[Grade] {
        &self.inputs
    }

    pub fn rows(&self) -> &[Row] {
        &self.rows
    }

    /// String count below each row.
    fn counts(&self) -> Vec<usize> {
        let mut c = 0;
        let mut out = Vec::with_capacity(self.rows.len());
        for row in &self.rows {
            out.push(c);
            match *row {
                Row::Cup(_) => c += 2,
                Row::Cap(_) => c -= 2,
                Row::Box { input, .. } => c += 2 * self.inputs[input].n,
            }
        }
        out
    }
}

/// Shading of the region at gap `p` when the outer region has sign `outer`.
pub fn region_sign(outer: Sign, p: usize) -> Sign {
    if p.is_multiple_of(2) {
        outer
    } else {
        outer.flip()
    }
}

/// Mirror image: reflect left to right.
pub fn adjoint_tangle(t: &Tangle) -> Tangle {
    let rows = t
        .rows
        .iter()
        .zip(t.counts())
        .map(|(row, c)| match *row {
            Row::Cup(p) => Row::Cup(c - p),
            Row::Cap(p) => Row::Cap(c - 2 - p),
            Row::Box { input, at } => Row::Box { input, at: c - at },
        })
        .collect();
    Tangle {
        boundary: t.boundary,
        inputs: t.inputs.clone(),
        rows,
    }
}

impl fmt::Display for Tangle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "tangle {}", self.boundary)?;
        if !self.inputs.is_empty() {
            let list: Vec<String> = self.inputs.iter().map(|g| g.to_string()).collect();
            write!(f, " inputs[{}]", list.join(","))?;
        }
        let rows: Vec<String> = self
            .rows
            .iter()
            .map(|r| match r {
                Row::Cup(p) => format!("cup {p}"),
                Row::Cap(p) => format!("cap {p}"),
                Row::Box { input, at } => format!("box {input} at {at}"),
            })
            .collect();
        write!(f, " {{ {} }}", rows.join("; "))
    }
}

/// Builders for the tangles behind the named operations.
pub mod library {
    use super::{Row, Tangle};
    use crate::loopspace::{Grade, Sign};

    fn build(boundary: Grade, inputs: Vec<Grade>, rows: Vec<Row>) -> Tangle {
        Tangle::new(boundary, inputs, rows).expect("library tangles are well formed")
    }

    /// A closed circle on the empty (0,±) boundary.
    pub fn circle(sign: Sign) -> Tangle {
        build(Grade::new(0, sign), vec![], vec![Row::Cup(0), Row::Cap(0)])
    }

    pub fn identity(g: Grade) -> Tangle {
        build(g, vec![g], vec![Row::Box { input: 0, at: 0 }])
    }

    /// x · y with x above y.
    pub fn multiplication(g: Grade) -> Tangle {
        let n = g.n;
        let mut rows = vec![Row::Box { input: 0, at: 0 }, Row::Box { input: 1, at: 2 * n }];
        rows.extend((n..2 * n).rev().map(Row::Cap));
        build(g, vec![g, g], rows)
    }

    /// Cap joining internal points j and j+1, for 1 ≤ j < 2n.
    pub fn alpha(j: usize, g: Grade) -> Tangle {
        assert!(j >= 1 && j < 2 * g.n);
        build(
            Grade::new(g.n - 1, g.sign),
            vec![g],
            vec![Row::Box { input: 0, at: 0 }, Row::Cap(j - 1)],
        )
    }

    /// Cap joining internal points 2n and 1; the output starts at internal point 2n−1.
    pub fn alpha_wrap(g: Grade) -> Tangle {
        let n = g.n;
        build(
            Grade::new(n - 1, g.sign),
            vec![g],
            vec![
                Row::Cup(0),
                Row::Cup(1),
                Row::Box { input: 0, at: 2 },
                Row::Cap(1),
                Row::Cap(2 * n - 1),
                Row::Cap(2 * n - 2),
            ],
        )
    }

    /// Cup joining output points j and j+1 on an input of grade g, for 1 ≤ j ≤ 2n+1.
    pub fn beta(j: usize, g: Grade) -> Tangle {
        assert!(j >= 1 && j <= 2 * g.n + 1);
        build(
            Grade::new(g.n + 1, g.sign),
            vec![g],
            vec![Row::Box { input: 0, at: 0 }, Row::Cup(j - 1)],
        )
    }

    /// Cup joining output points 2n+2 and 1; internal point 1 lands on output point 2n+1.
    pub fn beta_wrap(g: Grade) -> Tangle {
        assert!(g.n >= 1);
        build(
            Grade::new(g.n + 1, g.sign),
            vec![g],
            vec![Row::Cup(0), Row::Cup(1), Row::Box { input: 0, at: 2 }, Row::Cap(1)],
        )
    }

    /// Cap the first and last strings around the left, flipping the shading.
    pub fn strip_ends(g: Grade) -> Tangle {
        let n = g.n;
        build(
            Grade::new(n - 1, g.sign.flip()),
            vec![g],
            vec![
                Row::Cup(0),
                Row::Box { input: 0, at: 1 },
                Row::Cap(0),
                Row::Cap(2 * n - 2),
            ],
        )
    }

    /// Wrap one string around the left, flipping the shading.
    pub fn wrap_left(g: Grade) -> Tangle {
        build(
            Grade::new(g.n + 1, g.sign.flip()),
            vec![g],
            vec![Row::Cup(0), Row::Box { input: 0, at: 1 }],
        )
    }

    /// Add `s` through strings on the left.
    pub fn add_strings(s: usize, g: Grade) -> Tangle {
        let mut rows: Vec<Row> = (0..s).map(Row::Cup).collect();
        rows.push(Row::Box { input: 0, at: s });
        let sign = if s.is_multiple_of(2) { g.sign } else { g.sign.flip() };
        build(Grade::new(g.n + s, sign), vec![g], rows)
    }

    /// The Jones projection E_n in grade (n+1, sign).
    pub fn jones(n: usize, sign: Sign) -> Tangle {
        assert!(n >= 1);
        let mut rows: Vec<Row> = (0..n - 1).map(Row::Cup).collect();
        rows.push(Row::Cup(n - 1));
        rows.push(Row::Cup(n + 1));
        build(Grade::new(n + 1, sign), vec![], rows)
    }

    /// One click: the last string moves to the front.
    pub fn click_back(g: Grade) -> Tangle {
        let n = g.n;
        build(
            Grade::new(n, g.sign.flip()),
            vec![g],
            vec![Row::Cup(0), Row::Box { input: 0, at: 1 }, Row::Cap(2 * n)],
        )
    }

    /// One click: the first string moves to the back.
    pub fn click_forward(g: Grade) -> Tangle {
        build(
            Grade::new(g.n, g.sign.flip()),
            vec![g],
            vec![Row::Cup(0), Row::Box { input: 0, at: 1 }, Row::Cap(0)],
        )
    }

    /// Two clicks: the first two strings move to the back.
    pub fn rotate_two(g: Grade) -> Tangle {
        build(
            g,
            vec![g],
            vec![
                Row::Cup(0),
                Row::Cup(1),
                Row::Box { input: 0, at: 2 },
                Row::Cap(1),
                Row::Cap(0),
            ],
        )
    }

    /// Two clicks: the last two strings move to the front.
    pub fn rotate_two_back(g: Grade) -> Tangle {
        let n = g.n;
        build(
            g,
            vec![g],
            vec![
                Row::Cup(0),
                Row::Cup(1),
                Row::Box { input: 0, at: 2 },
                Row::Cap(2 * n + 1),
                Row::Cap(2 * n),
            ],
        )
    }

    /// A noncrossing matching of 2n boundary points (listed left to right) drawn
    /// with cups only.
    pub fn matching(grade: Grade, pairs: &[(usize, usize)]) -> Tangle {
        let mut sorted: Vec<(usize, usize)> = pairs
            .iter()
            .map(|&(a, b)| (a.min(b), a.max(b)))
            .collect();
        sorted.sort();
        let mut placed: Vec<usize> = Vec::new();
        let mut rows = Vec::new();
        for (a, b) in sorted {
            let gap = placed.iter().filter(|&&q| q < a).count();
            rows.push(Row::Cup(gap));
            placed.push(a);
            placed.push(b);
        }
        build(grade, vec![], rows)
    }
}
