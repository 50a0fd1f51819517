//! Seeded random traces for differential testing.
//!
//! The generator interleaves threads uniformly at random. A thread outside a
//! region opens one with probability `p_region`; inside a region it closes
//! it with probability `(1 - p_region) / 2`. The event budget counts
//! `begin`/`end` events, and enough of it is reserved to close every open
//! region before the trace ends. Locks follow a mild discipline: a thread
//! only acquires a lock nobody holds and only releases a lock it holds.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::trace::{OpKind, Trace, TraceBuilder};

/// Relative weights of the four memory and lock operations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OpMix {
    pub read: u32,
    pub write: u32,
    pub acquire: u32,
    pub release: u32,
}

impl Default for OpMix {
    fn default() -> Self {
        OpMix {
            read: 4,
            write: 3,
            acquire: 1,
            release: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GenConfig {
    pub threads: usize,
    /// Total events, `begin` and `end` included.
    pub events: usize,
    pub variables: usize,
    pub locks: usize,
    pub region_labels: usize,
    pub p_region: f64,
    pub mix: OpMix,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            threads: 3,
            events: 16,
            variables: 3,
            locks: 1,
            region_labels: 3,
            p_region: 0.6,
            mix: OpMix::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("need at least 2 threads, got {0}")]
    Threads(usize),
    #[error("{0} must be at least 1")]
    Zero(&'static str),
    #[error("p_region must lie in [0, 1], got {0}")]
    Probability(String),
    #[error("op-mix weights sum to zero")]
    Weights,
}

impl GenConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.threads < 2 {
            return Err(ConfigError::Threads(self.threads));
        }
        if self.variables == 0 {
            return Err(ConfigError::Zero("variables"));
        }
        if self.region_labels == 0 {
            return Err(ConfigError::Zero("region_labels"));
        }
        if !(0.0..=1.0).contains(&self.p_region) {
            return Err(ConfigError::Probability(format!("{}", self.p_region)));
        }
        let m = self.mix;
        let total = u64::from(m.read) + u64::from(m.write) + u64::from(m.acquire) + u64::from(m.release);
        if total == 0 {
            return Err(ConfigError::Weights);
        }
        Ok(())
    }

    /// A small configuration drawn from `seed`: 2-4 threads, 6-20 events,
    /// 1-4 variables, 0-2 locks and a region density between 0.2 and 0.9.
    pub fn small(seed: u64) -> Self {
        Self::small_within(seed, 20)
    }

    /// Like [`GenConfig::small`] with the event count capped at `max_events`
    /// (at least 6).
    pub fn small_within(seed: u64, max_events: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_c0f1_9000_0000);
        let max_events = max_events.max(6);
        GenConfig {
            threads: rng.gen_range(2..=4),
            events: rng.gen_range(6..=max_events),
            variables: rng.gen_range(1..=4),
            locks: rng.gen_range(0..=2),
            region_labels: rng.gen_range(1..=3),
            p_region: [0.2, 0.4, 0.6, 0.75, 0.9][rng.gen_range(0..5)],
            mix: OpMix::default(),
        }
    }
}

#[derive(Default, Clone)]
struct ThreadState {
    region: Option<usize>,
    held: Vec<usize>,
}

/// Deterministic for a fixed `(config, seed)`; the result always passes
/// [`crate::trace::validate`].
pub fn generate_random(config: &GenConfig, seed: u64) -> Result<Trace, ConfigError> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let names = |prefix: char, n: usize| -> Vec<String> { (1..=n).map(|i| format!("{prefix}{i}")).collect() };
    let threads = names('t', config.threads);
    let vars = names('x', config.variables);
    let locks = names('m', config.locks);
    let labels = names('L', config.region_labels);

    let mut state = alloc::vec![ThreadState::default(); config.threads];
    let mut lock_owner: Vec<Option<usize>> = alloc::vec![None; config.locks];
    let mut open = 0usize;
    let mut b = TraceBuilder::new();
    let p_end = (1.0 - config.p_region) / 2.0;

    for used in 0..config.events {
        let remaining = config.events - used;
        if remaining == open {
            // close regions in thread order
            let t = state
                .iter()
                .position(|s| s.region.is_some())
                .expect("open region");
            let l = state[t].region.take().expect("open region");
            open -= 1;
            b.event(&threads[t], OpKind::End, &labels[l]);
            continue;
        }
        let t = rng.gen_range(0..config.threads);
        let s = &mut state[t];
        match s.region {
            None if remaining >= open + 2 && rng.gen_bool(config.p_region) => {
                let l = rng.gen_range(0..config.region_labels);
                s.region = Some(l);
                open += 1;
                b.event(&threads[t], OpKind::Begin, &labels[l]);
                continue;
            }
            Some(l) if rng.gen_bool(p_end) => {
                s.region = None;
                open -= 1;
                b.event(&threads[t], OpKind::End, &labels[l]);
                continue;
            }
            _ => {}
        }
        let (kind, operand) = pick_op(&mut rng, config, t, &mut state, &mut lock_owner);
        let operand = match kind {
            OpKind::Read | OpKind::Write => &vars[operand],
            _ => &locks[operand],
        };
        b.event(&threads[t], kind, operand);
    }
    Ok(b.finish())
}

fn pick_op(
    rng: &mut ChaCha8Rng,
    config: &GenConfig,
    t: usize,
    state: &mut [ThreadState],
    lock_owner: &mut [Option<usize>],
) -> (OpKind, usize) {
    let m = config.mix;
    let free: Vec<usize> = (0..config.locks).filter(|&l| lock_owner[l].is_none()).collect();
    let held = !state[t].held.is_empty();
    let weights = [
        m.read,
        m.write,
        if free.is_empty() { 0 } else { m.acquire },
        if held { m.release } else { 0 },
    ];
    let total: u32 = weights.iter().sum();
    // memory ops are always possible; fall back to them when locks are not
    let pick = if total == 0 {
        match (m.read, m.write) {
            (0, _) => 1,
            (_, 0) => 0,
            _ => rng.gen_range(0..2),
        }
    } else {
        let mut r = rng.gen_range(0..total);
        let mut k = 0;
        while r >= weights[k] {
            r -= weights[k];
            k += 1;
        }
        k
    };
    match pick {
        0 => (OpKind::Read, rng.gen_range(0..config.variables)),
        1 => (OpKind::Write, rng.gen_range(0..config.variables)),
        2 => {
            let l = free[rng.gen_range(0..free.len())];
            lock_owner[l] = Some(t);
            state[t].held.push(l);
            (OpKind::Acquire, l)
        }
        _ => {
            let held = &mut state[t].held;
            let l = held.remove(rng.gen_range(0..held.len()));
            lock_owner[l] = None;
            (OpKind::Release, l)
        }
    }
}
