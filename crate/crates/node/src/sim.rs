//! Drivers behind the `simnet` binary: one scripted run, or a sweep of
//! random scenarios, each checked by both oracles.

use std::fmt;

use relaymesh_core::simnet::{
    assert_confidentiality, check_audit, random_scenario, Scenario, SimError, SimNetwork, Topology,
};

#[derive(Debug, Clone, Copy)]
pub struct Shape {
    pub agencies: usize,
    pub relays: usize,
    pub clients: usize,
    pub hops: usize,
}

impl Default for Shape {
    fn default() -> Self {
        Shape {
            agencies: 2,
            relays: 3,
            clients: 3,
            hops: relaymesh_core::routing::DEFAULT_HOPS,
        }
    }
}

impl Shape {
    fn topology(&self, seed: u64) -> Topology {
        Topology::new(self.agencies, self.relays, self.clients, seed).with_hops(self.hops)
    }
}

/// The outcome of one seeded run.
#[derive(Debug)]
pub struct RunReport {
    pub seed: u64,
    pub actions: usize,
    pub frames: usize,
    pub delivered: usize,
    pub audit: Vec<(String, usize)>,
    /// Oracle failures, empty on success.
    pub failures: Vec<String>,
    pub trace: String,
}

impl RunReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

impl fmt::Display for RunReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let audit: Vec<String> = self.audit.iter().map(|(a, n)| format!("{a}={n}")).collect();
        write!(
            f,
            "seed={} actions={} frames={} delivered={} audit[{}] {}",
            self.seed,
            self.actions,
            self.frames,
            self.delivered,
            audit.join(","),
            if self.passed() { "PASS" } else { "FAIL" }
        )?;
        for fail in &self.failures {
            write!(f, "\n  {fail}")?;
        }
        Ok(())
    }
}

fn finish(seed: u64, net: &SimNetwork, scenario: &Scenario) -> RunReport {
    let mut failures = Vec::new();
    if let Err(v) = assert_confidentiality(net.trace(), &scenario.bodies()) {
        failures.push(format!("confidentiality: {v:?}"));
    }
    if let Err(m) = check_audit(net) {
        failures.push(format!("audit: {m:?}"));
    }
    RunReport {
        seed,
        actions: scenario.actions.len(),
        frames: net.trace().len(),
        delivered: net.ledger().delivered.len(),
        audit: net.agencies().into_iter().map(|a| {
            let n = net.audit_count(&a);
            (a, n)
        }).collect(),
        failures,
        trace: net.export_trace(),
    }
}

pub fn run(seed: u64, shape: Shape, scenario: &Scenario) -> Result<RunReport, SimError> {
    let mut net = SimNetwork::spawn(&shape.topology(seed))?;
    net.run_scenario(scenario)?;
    Ok(finish(seed, &net, scenario))
}

/// A random scenario for `seed`, run and checked. A simulator error counts
/// as a failure rather than aborting the sweep.
pub fn fuzz_one(seed: u64, shape: Shape) -> RunReport {
    let mut net = match SimNetwork::spawn(&shape.topology(seed)) {
        Ok(n) => n,
        Err(e) => return error_report(seed, e),
    };
    let scenario = random_scenario(net.users(), seed);
    if let Err(e) = net.run_scenario(&scenario) {
        return error_report(seed, e);
    }
    finish(seed, &net, &scenario)
}

fn error_report(seed: u64, e: SimError) -> RunReport {
    RunReport {
        seed,
        actions: 0,
        frames: 0,
        delivered: 0,
        audit: Vec::new(),
        failures: vec![e.to_string()],
        trace: String::new(),
    }
}

/// Parses `a..b`, end exclusive.
pub fn parse_seed_range(s: &str) -> Result<std::ops::Range<u64>, String> {
    let (a, b) = s.split_once("..").ok_or_else(|| format!("expected <a>..<b>, got {s:?}"))?;
    let a: u64 = a.trim().parse().map_err(|e| format!("bad start {a:?}: {e}"))?;
    let b: u64 = b.trim().parse().map_err(|e| format!("bad end {b:?}: {e}"))?;
    if a >= b {
        return Err(format!("empty range {a}..{b}"));
    }
    Ok(a..b)
}
