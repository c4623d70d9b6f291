//! Verdicts for the empirical property checks. The vocabulary keeps the
//! epistemic status explicit: these are budgeted fuzzers, so `Pass` means
//! "no counterexample found", never a proof.

use serde::Serialize;
use std::fmt;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Property {
    #[serde(rename = "consistency")]
    Consistency,
    #[serde(rename = "topology-independence")]
    TopologyIndependence,
    #[serde(rename = "coordination-free")]
    CoordinationFree,
    #[serde(rename = "monotone")]
    Monotone,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum VerdictKind {
    #[serde(rename = "pass")]
    Pass,
    #[serde(rename = "fail")]
    Fail,
    #[serde(rename = "witness-found")]
    WitnessFound,
    #[serde(rename = "no-witness")]
    NoWitness,
}

/// Counts of explored cells.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct Explored {
    pub partitions: usize,
    pub schedules: usize,
    pub networks: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct CheckVerdict {
    pub property: Property,
    pub result: VerdictKind,
    /// Reproducible evidence: seeds, partitions, differing outputs.
    pub evidence: Vec<String>,
    /// Cells whose run hit the step cap without quiescence.
    pub inconclusive_cells: usize,
    pub explored: Explored,
}

impl CheckVerdict {
    /// A negative-by-absence verdict is inconclusive when some cells never
    /// reached quiescence: the unexplored cells could hide a counterexample.
    pub fn is_inconclusive(&self) -> bool {
        self.inconclusive_cells > 0
            && matches!(self.result, VerdictKind::Pass | VerdictKind::NoWitness)
    }

    /// Process exit code: 0 pass/witness, 1 fail/no-witness, 2 inconclusive.
    pub fn exit_code(&self) -> i32 {
        if self.is_inconclusive() {
            2
        } else {
            match self.result {
                VerdictKind::Pass | VerdictKind::WitnessFound => 0,
                VerdictKind::Fail | VerdictKind::NoWitness => 1,
            }
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("verdict serializes")
    }
}

impl fmt::Display for CheckVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "property: {:?}", self.property)?;
        writeln!(f, "result: {:?}", self.result)?;
        writeln!(
            f,
            "explored: {} partitions x {} schedules x {} networks ({} inconclusive cells)",
            self.explored.partitions,
            self.explored.schedules,
            self.explored.networks,
            self.inconclusive_cells
        )?;
        for e in &self.evidence {
            writeln!(f, "evidence: {e}")?;
        }
        Ok(())
    }
}
