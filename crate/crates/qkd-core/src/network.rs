//! Star-topology network: a controller drives a 1xn optical switch, giving
//! one client at a time the full channel. Each switch costs a time-alignment
//! overhead before the slot becomes productive. Produced key blocks land in
//! a per-client consumable store with strictly forward watermarks.

use std::collections::HashMap;
use std::io::Write;
use std::sync::Mutex;

use rand::RngCore;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::bits::BitString;
use crate::error::{Error, Result};
use crate::model::{presets, IntensitySettings, LinkParams};
use crate::security::{EstimatorVariant, DEFAULT_EC_EFFICIENCY};
use crate::session::run_session;
use crate::sim::EveModel;

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Schedule {
    RoundRobin,
    /// Deterministic weighted round-robin (largest-remainder rule).
    Priority(Vec<f64>),
    /// Serve the client with the lowest key-buffer fill ratio.
    OnDemand,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NetworkConfig {
    pub server_name: String,
    pub clients: Vec<(String, LinkParams)>,
    pub switch_fanout: usize,
    pub alignment_time_s: f64,
    pub schedule: Schedule,
    pub slot_duration_s: f64,
    /// Intensity settings for every session; per-link preset defaults when
    /// absent.
    pub intensities: Option<IntensitySettings>,
    /// Denominator of the OnDemand fill ratio.
    pub buffer_target_bits: u64,
    pub variant: EstimatorVariant,
    pub ec_efficiency: f64,
}

impl NetworkConfig {
    /// Round-robin configuration over the given clients.
    pub fn new(server_name: impl Into<String>, clients: Vec<(String, LinkParams)>) -> Self {
        let fanout = clients.len().max(1);
        NetworkConfig {
            server_name: server_name.into(),
            clients,
            switch_fanout: fanout,
            alignment_time_s: 0.5,
            schedule: Schedule::RoundRobin,
            slot_duration_s: 5.0,
            intensities: None,
            buffer_target_bits: 1_000_000,
            variant: EstimatorVariant::Standard,
            ec_efficiency: DEFAULT_EC_EFFICIENCY,
        }
    }

    /// The reference three-client star (benjamin, copernico, keplero).
    pub fn reference_star() -> Self {
        NetworkConfig::new(
            "galileo",
            presets::all()
                .into_iter()
                .map(|l| (l.name.clone(), l))
                .collect(),
        )
    }

    pub fn validate(&self) -> Result<()> {
        if self.clients.is_empty() {
            return Err(Error::NoClients);
        }
        if self.clients.len() > self.switch_fanout {
            return Err(Error::InvalidParameter(format!(
                "{} clients exceed switch fanout {}",
                self.clients.len(),
                self.switch_fanout
            )));
        }
        if !(self.slot_duration_s > 0.0) {
            return Err(Error::InvalidParameter("slot_duration_s must be > 0".into()));
        }
        if self.alignment_time_s < 0.0 {
            return Err(Error::InvalidParameter(
                "alignment_time_s must be >= 0".into(),
            ));
        }
        if let Schedule::Priority(w) = &self.schedule {
            if w.len() != self.clients.len() {
                return Err(Error::InvalidParameter(
                    "priority weights must match client count".into(),
                ));
            }
            if w.iter().any(|&x| x < 0.0) || w.iter().sum::<f64>() <= 0.0 {
                return Err(Error::InvalidParameter(
                    "priority weights must be nonnegative with a positive sum".into(),
                ));
            }
        }
        for (_, link) in &self.clients {
            link.validate()?;
        }
        Ok(())
    }

    fn settings_for(&self, link: &LinkParams) -> IntensitySettings {
        self.intensities
            .clone()
            .unwrap_or_else(|| presets::default_intensities(link))
    }
}

// ---------------------------------------------------------------------------
// Scheduler
// ---------------------------------------------------------------------------

#[derive(Debug, Default)]
pub struct SchedulerState {
    rr_next: usize,
    credits: Vec<f64>,
}

/// Pick the client for the next slot. RoundRobin cycles in list order;
/// Priority accrues fractional credits and serves the largest; OnDemand
/// serves the emptiest buffer (ties broken by client name).
pub fn schedule_next(
    state: &mut SchedulerState,
    config: &NetworkConfig,
    buffer: &KeyBuffer,
) -> Result<usize> {
    let n = config.clients.len();
    if n == 0 {
        return Err(Error::NoClients);
    }
    match &config.schedule {
        Schedule::RoundRobin => {
            let idx = state.rr_next % n;
            state.rr_next += 1;
            Ok(idx)
        }
        Schedule::Priority(weights) => {
            if state.credits.len() != n {
                state.credits = vec![0.0; n];
            }
            let total: f64 = weights.iter().sum();
            for (c, w) in state.credits.iter_mut().zip(weights) {
                *c += w / total;
            }
            let mut best = 0;
            for i in 1..n {
                if state.credits[i] > state.credits[best] + 1e-12 {
                    best = i;
                }
            }
            state.credits[best] -= 1.0;
            Ok(best)
        }
        Schedule::OnDemand => {
            let target = config.buffer_target_bits.max(1) as f64;
            let mut best = 0;
            let mut best_key = (f64::INFINITY, "");
            for (i, (name, _)) in config.clients.iter().enumerate() {
                let ratio = buffer.available_bits(name)? as f64 / target;
                let key = (ratio, name.as_str());
                if key < best_key {
                    best_key = key;
                    best = i;
                }
            }
            Ok(best)
        }
    }
}

// ---------------------------------------------------------------------------
// Key store
// ---------------------------------------------------------------------------

/// Metadata of one produced key block.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KeyBlockInfo {
    pub session_id: u64,
    pub link_name: String,
    pub length_bits: usize,
    pub rate_bps_estimate: f64,
}

#[derive(Debug, Default, Serialize, Deserialize)]
struct ClientQueue {
    material: BitString,
    consumed_bits: usize,
    blocks: Vec<KeyBlockInfo>,
}

/// Per-client key material with a strictly forward consumption watermark:
/// produced bits are immutable and no bit is ever issued twice. Consumption
/// is linearizable; producers and consumers may run concurrently.
#[derive(Debug, Default)]
pub struct KeyBuffer {
    clients: HashMap<String, Mutex<ClientQueue>>,
}

impl KeyBuffer {
    pub fn new(client_names: impl IntoIterator<Item = String>) -> Self {
        KeyBuffer {
            clients: client_names
                .into_iter()
                .map(|n| (n, Mutex::new(ClientQueue::default())))
                .collect(),
        }
    }

    fn queue(&self, client: &str) -> Result<&Mutex<ClientQueue>> {
        self.clients
            .get(client)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown client '{client}'")))
    }

    pub fn produce(&self, client: &str, bits: &BitString, info: KeyBlockInfo) -> Result<()> {
        let mut q = self.queue(client)?.lock().expect("key buffer poisoned");
        q.material.extend_from(bits);
        q.blocks.push(info);
        Ok(())
    }

    /// Consume exactly `n_bits`, advancing the watermark. Subsequent calls
    /// never return overlapping material.
    pub fn consume(&self, client: &str, n_bits: usize) -> Result<BitString> {
        let mut q = self.queue(client)?.lock().expect("key buffer poisoned");
        let available = q.material.len() - q.consumed_bits;
        if n_bits > available {
            return Err(Error::InsufficientKey {
                requested: n_bits,
                available,
            });
        }
        let out = q.material.slice(q.consumed_bits, n_bits);
        q.consumed_bits += n_bits;
        Ok(out)
    }

    pub fn produced_bits(&self, client: &str) -> Result<usize> {
        Ok(self.queue(client)?.lock().expect("poisoned").material.len())
    }

    pub fn consumed_bits(&self, client: &str) -> Result<usize> {
        Ok(self.queue(client)?.lock().expect("poisoned").consumed_bits)
    }

    pub fn available_bits(&self, client: &str) -> Result<usize> {
        let q = self.queue(client)?.lock().expect("poisoned");
        Ok(q.material.len() - q.consumed_bits)
    }

    pub fn client_names(&self) -> Vec<String> {
        let mut names: Vec<String> = self.clients.keys().cloned().collect();
        names.sort();
        names
    }

    /// Persist per-client key material and watermark metadata. Key bytes go
    /// to `<client>.key`, metadata to `<client>.meta.json`. The watermark
    /// file is written after the material file so a crash can only lose an
    /// advance, never re-issue bits already handed out.
    pub fn persist(&self, dir: &std::path::Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        for name in self.client_names() {
            let q = self.queue(&name)?.lock().expect("poisoned");
            let key_path = dir.join(format!("{name}.key"));
            std::fs::write(&key_path, q.material.to_bytes())?;
            let meta = serde_json::json!({
                "client": name,
                "produced_bits": q.material.len(),
                "consumed_bits": q.consumed_bits,
                "blocks": q.blocks,
            });
            let meta_path = dir.join(format!("{name}.meta.json"));
            std::fs::write(&meta_path, serde_json::to_vec_pretty(&meta)?)?;
        }
        Ok(())
    }

    pub fn load(dir: &std::path::Path) -> Result<Self> {
        let mut buffer = KeyBuffer::default();
        for entry in std::fs::read_dir(dir)? {
            let path = entry?.path();
            let Some(name) = path
                .file_name()
                .and_then(|s| s.to_str())
                .and_then(|s| s.strip_suffix(".meta.json"))
            else {
                continue;
            };
            let meta: serde_json::Value = serde_json::from_slice(&std::fs::read(&path)?)?;
            let produced = meta["produced_bits"].as_u64().unwrap_or(0) as usize;
            let consumed = meta["consumed_bits"].as_u64().unwrap_or(0) as usize;
            let blocks: Vec<KeyBlockInfo> =
                serde_json::from_value(meta["blocks"].clone()).unwrap_or_default();
            let bytes = std::fs::read(dir.join(format!("{name}.key")))?;
            buffer.clients.insert(
                name.to_string(),
                Mutex::new(ClientQueue {
                    material: BitString::from_bytes(&bytes, produced),
                    consumed_bits: consumed,
                    blocks,
                }),
            );
        }
        Ok(buffer)
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Config(format!("JSON: {e}"))
    }
}

// ---------------------------------------------------------------------------
// Network timeline
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum EventKind {
    Switch {
        client: String,
    },
    Alignment {
        client: String,
        duration_s: f64,
    },
    Session {
        client: String,
        pulses: u64,
        sifted_bits: usize,
        final_bits: usize,
        rate_bps_estimate: f64,
        qber_signal: f64,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NetworkEvent {
    pub timestamp_s: f64,
    #[serde(flatten)]
    pub kind: EventKind,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClientYield {
    pub client: String,
    pub produced_bits: usize,
    pub bits_per_second: f64,
}

pub struct NetworkRun {
    pub events: Vec<NetworkEvent>,
    pub yields: Vec<ClientYield>,
    pub buffer: KeyBuffer,
}

/// Write the event log as line-delimited JSON records.
pub fn write_event_log<W: Write>(events: &[NetworkEvent], mut w: W) -> std::io::Result<()> {
    for e in events {
        serde_json::to_writer(&mut w, e)?;
        writeln!(w)?;
    }
    Ok(())
}

/// Simulate the switched star for `total_time_s`. Each slot pays the
/// alignment overhead, then exchanges pulses at the selected link's source
/// rate and runs the full post-processing pipeline; the final key block is
/// appended to that client's buffer.
pub fn run_network(config: &NetworkConfig, total_time_s: f64, seed: u64) -> Result<NetworkRun> {
    config.validate()?;
    if !(total_time_s > 0.0) {
        return Err(Error::InvalidParameter("total_time_s must be > 0".into()));
    }
    if config.alignment_time_s >= config.slot_duration_s {
        return Err(Error::AlignmentExceedsSlot {
            alignment_s: config.alignment_time_s,
            slot_s: config.slot_duration_s,
        });
    }

    let buffer = KeyBuffer::new(config.clients.iter().map(|(n, _)| n.clone()));
    let mut events = Vec::new();
    let mut scheduler = SchedulerState::default();
    let mut seeder = ChaCha12Rng::seed_from_u64(seed);

    let mut t = 0.0;
    let mut session_id = 0u64;
    while t + config.slot_duration_s <= total_time_s + 1e-9 {
        let idx = schedule_next(&mut scheduler, config, &buffer)?;
        let (name, link) = &config.clients[idx];
        events.push(NetworkEvent {
            timestamp_s: t,
            kind: EventKind::Switch {
                client: name.clone(),
            },
        });
        events.push(NetworkEvent {
            timestamp_s: t,
            kind: EventKind::Alignment {
                client: name.clone(),
                duration_s: config.alignment_time_s,
            },
        });

        let productive_s = config.slot_duration_s - config.alignment_time_s;
        let pulses = (productive_s * link.pulse_rate_hz).floor() as u64;
        let session_seed = seeder.next_u64();
        if pulses > 0 {
            let settings = config.settings_for(link);
            let outcome = run_session(
                link,
                &settings,
                &EveModel::none(),
                pulses,
                session_seed,
                config.variant,
                config.ec_efficiency,
            )?;
            let qber = outcome
                .stats
                .qber(crate::sim::IntensityClass::Signal)
                .unwrap_or(0.0);
            buffer.produce(
                name,
                &outcome.final_key,
                KeyBlockInfo {
                    session_id,
                    link_name: link.name.clone(),
                    length_bits: outcome.final_key.len(),
                    rate_bps_estimate: outcome.estimate.rate_bps,
                },
            )?;
            events.push(NetworkEvent {
                timestamp_s: t + config.alignment_time_s,
                kind: EventKind::Session {
                    client: name.clone(),
                    pulses,
                    sifted_bits: outcome.sifted_signal_len,
                    final_bits: outcome.final_key.len(),
                    rate_bps_estimate: outcome.estimate.rate_bps,
                    qber_signal: qber,
                },
            });
        }
        session_id += 1;
        t += config.slot_duration_s;
    }

    let yields = config
        .clients
        .iter()
        .map(|(name, _)| {
            let produced = buffer.produced_bits(name)?;
            Ok(ClientYield {
                client: name.clone(),
                produced_bits: produced,
                bits_per_second: produced as f64 / total_time_s,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(NetworkRun {
        events,
        yields,
        buffer,
    })
}

/// Passive-coupler comparison: every client continuously receives its split
/// fraction of the light, modelled as extra attenuation of
/// `-10 log10(fraction)` dB on the link. Returns per-client yields over the
/// same total time with no switching overhead.
pub fn passive_network_comparator(
    config: &NetworkConfig,
    splits: &[f64],
    total_time_s: f64,
    seed: u64,
) -> Result<Vec<ClientYield>> {
    config.validate()?;
    if splits.len() != config.clients.len() {
        return Err(Error::InvalidSplit(format!(
            "{} fractions for {} clients",
            splits.len(),
            config.clients.len()
        )));
    }
    if splits.iter().any(|&s| !(0.0..=1.0).contains(&s)) {
        return Err(Error::InvalidSplit("fractions must lie in [0,1]".into()));
    }
    if splits.iter().sum::<f64>() > 1.0 + 1e-9 {
        return Err(Error::InvalidSplit("fractions must sum to at most 1".into()));
    }

    let mut seeder = ChaCha12Rng::seed_from_u64(seed);
    let mut yields = Vec::new();
    for ((name, link), &split) in config.clients.iter().zip(splits) {
        let session_seed = seeder.next_u64();
        if split == 0.0 {
            yields.push(ClientYield {
                client: name.clone(),
                produced_bits: 0,
                bits_per_second: 0.0,
            });
            continue;
        }
        let mut split_link = link.clone();
        split_link.extra_loss_db += -10.0 * split.log10();
        let pulses = (total_time_s * link.pulse_rate_hz).floor() as u64;
        let settings = config.settings_for(link);
        let outcome = run_session(
            &split_link,
            &settings,
            &EveModel::none(),
            pulses,
            session_seed,
            config.variant,
            config.ec_efficiency,
        )?;
        yields.push(ClientYield {
            client: name.clone(),
            produced_bits: outcome.final_key.len(),
            bits_per_second: outcome.final_key.len() as f64 / total_time_s,
        });
    }
    Ok(yields)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_config(names: &[&str]) -> NetworkConfig {
        let clients = names
            .iter()
            .map(|n| (n.to_string(), LinkParams::telecom(*n, 15.0)))
            .collect();
        let mut c = NetworkConfig::new("server", clients);
        c.slot_duration_s = 0.01;
        c.alignment_time_s = 0.0;
        c
    }

    #[test]
    fn round_robin_cycles_in_order() {
        let config = tiny_config(&["a", "b", "c"]);
        let buffer = KeyBuffer::new(config.clients.iter().map(|(n, _)| n.clone()));
        let mut st = SchedulerState::default();
        let picks: Vec<usize> = (0..6)
            .map(|_| schedule_next(&mut st, &config, &buffer).unwrap())
            .collect();
        assert_eq!(picks, vec![0, 1, 2, 0, 1, 2]);
    }

    #[test]
    fn single_client_always_selected() {
        let config = tiny_config(&["only"]);
        let buffer = KeyBuffer::new(["only".to_string()]);
        let mut st = SchedulerState::default();
        for _ in 0..5 {
            assert_eq!(schedule_next(&mut st, &config, &buffer).unwrap(), 0);
        }
    }

    #[test]
    fn priority_follows_weights() {
        let mut config = tiny_config(&["a", "b"]);
        config.schedule = Schedule::Priority(vec![2.0, 1.0]);
        let buffer = KeyBuffer::new(config.clients.iter().map(|(n, _)| n.clone()));
        let mut st = SchedulerState::default();
        let picks: Vec<usize> = (0..6)
            .map(|_| schedule_next(&mut st, &config, &buffer).unwrap())
            .collect();
        let a_count = picks.iter().filter(|&&p| p == 0).count();
        assert_eq!(a_count, 4);
        // deterministic: same config replays the same order
        let mut st2 = SchedulerState::default();
        let picks2: Vec<usize> = (0..6)
            .map(|_| schedule_next(&mut st2, &config, &buffer).unwrap())
            .collect();
        assert_eq!(picks, picks2);
    }

    #[test]
    fn on_demand_serves_emptiest_buffer() {
        let mut config = tiny_config(&["a", "b", "c"]);
        config.schedule = Schedule::OnDemand;
        let buffer = KeyBuffer::new(config.clients.iter().map(|(n, _)| n.clone()));
        let full: BitString = (0..1000).map(|_| true).collect();
        let half: BitString = (0..500).map(|_| true).collect();
        let info = |n: &str| KeyBlockInfo {
            session_id: 0,
            link_name: n.into(),
            length_bits: 0,
            rate_bps_estimate: 0.0,
        };
        buffer.produce("a", &full, info("a")).unwrap();
        buffer.produce("c", &half, info("c")).unwrap();
        let mut st = SchedulerState::default();
        // b is empty
        assert_eq!(schedule_next(&mut st, &config, &buffer).unwrap(), 1);
    }

    #[test]
    fn consume_contract() {
        let buffer = KeyBuffer::new(["x".to_string()]);
        let bits: BitString = (0..100).map(|i| i % 3 == 0).collect();
        buffer
            .produce(
                "x",
                &bits,
                KeyBlockInfo {
                    session_id: 1,
                    link_name: "x".into(),
                    length_bits: 100,
                    rate_bps_estimate: 0.0,
                },
            )
            .unwrap();

        let nothing = buffer.consume("x", 0).unwrap();
        assert!(nothing.is_empty());
        assert_eq!(buffer.consumed_bits("x").unwrap(), 0);

        let first = buffer.consume("x", 40).unwrap();
        let second = buffer.consume("x", 40).unwrap();
        let mut joined = first.clone();
        joined.extend_from(&second);
        assert_eq!(joined, bits.slice(0, 80));

        let err = buffer.consume("x", 40).unwrap_err();
        assert!(matches!(
            err,
            Error::InsufficientKey {
                requested: 40,
                available: 20
            }
        ));
        // conservation
        assert_eq!(
            buffer.produced_bits("x").unwrap(),
            buffer.consumed_bits("x").unwrap() + buffer.available_bits("x").unwrap()
        );
    }

    #[test]
    fn persistence_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let buffer = KeyBuffer::new(["n1".to_string(), "n2".to_string()]);
        let bits: BitString = (0..77).map(|i| i % 2 == 1).collect();
        buffer
            .produce(
                "n1",
                &bits,
                KeyBlockInfo {
                    session_id: 9,
                    link_name: "n1".into(),
                    length_bits: 77,
                    rate_bps_estimate: 123.0,
                },
            )
            .unwrap();
        buffer.consume("n1", 10).unwrap();
        buffer.persist(dir.path()).unwrap();

        let loaded = KeyBuffer::load(dir.path()).unwrap();
        assert_eq!(loaded.produced_bits("n1").unwrap(), 77);
        assert_eq!(loaded.consumed_bits("n1").unwrap(), 10);
        // the next consumption continues where the watermark left off
        assert_eq!(
            loaded.consume("n1", 7).unwrap(),
            bits.slice(10, 7)
        );
    }

    #[test]
    fn alignment_must_fit_in_slot() {
        let mut config = tiny_config(&["a"]);
        config.alignment_time_s = 0.01;
        assert!(matches!(
            run_network(&config, 0.1, 1),
            Err(Error::AlignmentExceedsSlot { .. })
        ));
    }

    #[test]
    fn single_slot_equals_continuous_session() {
        // one client, one slot covering the whole run, zero alignment
        let mut config = tiny_config(&["solo"]);
        config.slot_duration_s = 0.05;
        let run = run_network(&config, 0.05, 99).unwrap();

        let mut seeder = ChaCha12Rng::seed_from_u64(99);
        let session_seed = seeder.next_u64();
        let link = &config.clients[0].1;
        let outcome = run_session(
            link,
            &presets::default_intensities(link),
            &EveModel::none(),
            (0.05 * link.pulse_rate_hz) as u64,
            session_seed,
            EstimatorVariant::Standard,
            DEFAULT_EC_EFFICIENCY,
        )
        .unwrap();
        assert_eq!(run.yields[0].produced_bits, outcome.final_key.len());
    }

    #[test]
    fn alignment_overhead_reduces_yield() {
        let mut config = tiny_config(&["a"]);
        config.slot_duration_s = 0.05;
        config.alignment_time_s = 0.0;
        let full: usize = run_network(&config, 0.2, 5)
            .unwrap()
            .yields
            .iter()
            .map(|y| y.produced_bits)
            .sum();
        config.alignment_time_s = 0.02;
        let reduced: usize = run_network(&config, 0.2, 5)
            .unwrap()
            .yields
            .iter()
            .map(|y| y.produced_bits)
            .sum();
        config.alignment_time_s = 0.04;
        let tiny: usize = run_network(&config, 0.2, 5)
            .unwrap()
            .yields
            .iter()
            .map(|y| y.produced_bits)
            .sum();
        assert!(full > reduced, "{full} vs {reduced}");
        assert!(reduced > tiny, "{reduced} vs {tiny}");
    }

    #[test]
    fn passive_split_validation() {
        let config = tiny_config(&["a", "b"]);
        assert!(matches!(
            passive_network_comparator(&config, &[0.7, 0.7], 0.01, 1),
            Err(Error::InvalidSplit(_))
        ));
        assert!(matches!(
            passive_network_comparator(&config, &[0.5], 0.01, 1),
            Err(Error::InvalidSplit(_))
        ));
        let yields = passive_network_comparator(&config, &[0.5, 0.0], 0.01, 1).unwrap();
        assert_eq!(yields[1].produced_bits, 0);
    }

    #[test]
    fn event_log_is_line_json() {
        let mut config = tiny_config(&["a"]);
        config.slot_duration_s = 0.02;
        let run = run_network(&config, 0.04, 7).unwrap();
        let mut buf = Vec::new();
        write_event_log(&run.events, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        for line in text.lines() {
            let v: serde_json::Value = serde_json::from_str(line).unwrap();
            assert!(v["timestamp_s"].is_number());
            assert!(v["event"].is_string());
        }
        assert!(text.lines().count() >= 4);
    }
}
