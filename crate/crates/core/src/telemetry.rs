//! Seeded IoT sensor streams with fault injection.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::codec::Encoder;
use crate::contracts::Quantity;
use crate::identity::{Address, Hash32};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SensorKind {
    Temperature,
    Humidity,
    Pressure,
    Location,
    Weight,
    LeakAlarm,
    RfidScan,
}

impl SensorKind {
    pub const ALL: [SensorKind; 7] = [
        SensorKind::Temperature,
        SensorKind::Humidity,
        SensorKind::Pressure,
        SensorKind::Location,
        SensorKind::Weight,
        SensorKind::LeakAlarm,
        SensorKind::RfidScan,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SensorKind::Temperature => "temperature",
            SensorKind::Humidity => "humidity",
            SensorKind::Pressure => "pressure",
            SensorKind::Location => "location",
            SensorKind::Weight => "weight",
            SensorKind::LeakAlarm => "leak_alarm",
            SensorKind::RfidScan => "rfid_scan",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.as_str() == s)
    }

    /// The contract quantity checked on-chain, for temperature/humidity/pressure.
    pub fn quantity(self) -> Option<Quantity> {
        match self {
            SensorKind::Temperature => Some(Quantity::Temperature),
            SensorKind::Humidity => Some(Quantity::Humidity),
            SensorKind::Pressure => Some(Quantity::Pressure),
            _ => None,
        }
    }
}

impl fmt::Display for SensorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Reading payload. Locations are micro-degrees.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SensorValue {
    Scalar(i64),
    Location { lat: i64, lon: i64 },
}

impl SensorValue {
    pub fn location(lat: i64, lon: i64) -> Self {
        SensorValue::Location { lat, lon }
    }

    pub fn scalar(self) -> i64 {
        match self {
            SensorValue::Scalar(v) => v,
            SensorValue::Location { lat, .. } => lat,
        }
    }

    /// `(value, secondary)` as recorded on-chain.
    pub fn pair(self) -> (i64, i64) {
        match self {
            SensorValue::Scalar(v) => (v, 0),
            SensorValue::Location { lat, lon } => (lat, lon),
        }
    }

    fn shifted(self, offset: i64) -> Self {
        match self {
            SensorValue::Scalar(v) => SensorValue::Scalar(v.saturating_add(offset)),
            SensorValue::Location { lat, lon } => {
                SensorValue::Location { lat: lat.saturating_add(offset), lon: lon.saturating_add(offset) }
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SensorReading {
    pub kind: SensorKind,
    pub value: SensorValue,
    pub tick: u64,
    pub source: Address,
}

/// One sensor on the shipment.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Channel {
    pub kind: SensorKind,
    pub setpoint: i64,
    /// Uniform noise half-width.
    #[serde(default)]
    pub noise: u64,
    /// Starting longitude for location channels.
    #[serde(default)]
    pub setpoint_lon: i64,
    /// Per-tick movement `(lat, lon)` for location channels.
    #[serde(default)]
    pub step: (i64, i64),
}

impl Channel {
    pub fn new(kind: SensorKind, setpoint: i64, noise: u64) -> Self {
        Self { kind, setpoint, noise, setpoint_lon: 0, step: (0, 0) }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FaultSpec {
    pub kind: SensorKind,
    pub start: u64,
    /// Inclusive.
    pub end: u64,
    pub offset: i64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SensorProfile {
    pub channels: Vec<Channel>,
    pub duration: u64,
    #[serde(default)]
    pub faults: Vec<FaultSpec>,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TelemetryError {
    #[error("fault window {start}..={end} outside stream ticks 0..{duration}")]
    WindowOutOfRange { start: u64, end: u64, duration: u64 },
}

impl SensorProfile {
    pub fn validate(&self) -> Result<(), TelemetryError> {
        for f in &self.faults {
            check_window(f, self.duration)?;
        }
        Ok(())
    }

    /// Generated readings with every configured fault applied.
    pub fn stream(&self, source: Address, seed: u64) -> Result<Vec<SensorReading>, TelemetryError> {
        let mut readings = generate_readings(self, source, seed);
        for f in &self.faults {
            check_window(f, self.duration)?;
            readings = apply(readings, f);
        }
        Ok(readings)
    }
}

fn check_window(f: &FaultSpec, duration: u64) -> Result<(), TelemetryError> {
    if f.start > f.end || f.end >= duration {
        return Err(TelemetryError::WindowOutOfRange { start: f.start, end: f.end, duration });
    }
    Ok(())
}

fn noise(rng: &mut ChaCha8Rng, amplitude: u64) -> i64 {
    if amplitude == 0 {
        return 0;
    }
    let a = amplitude.min(i64::MAX as u64) as i64;
    rng.gen_range(-a..=a)
}

/// One reading per (tick, channel), ticks `0..duration`, channels in profile
/// order. Faults are not applied.
pub fn generate_readings(profile: &SensorProfile, source: Address, seed: u64) -> Vec<SensorReading> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(profile.channels.len() * profile.duration as usize);
    for tick in 0..profile.duration {
        for ch in &profile.channels {
            let t = tick as i64;
            let value = match ch.kind {
                SensorKind::Location => SensorValue::Location {
                    lat: ch.setpoint + ch.step.0 * t + noise(&mut rng, ch.noise),
                    lon: ch.setpoint_lon + ch.step.1 * t + noise(&mut rng, ch.noise),
                },
                _ => SensorValue::Scalar(ch.setpoint + noise(&mut rng, ch.noise)),
            };
            out.push(SensorReading { kind: ch.kind, value, tick, source });
        }
    }
    out
}

fn apply(readings: Vec<SensorReading>, fault: &FaultSpec) -> Vec<SensorReading> {
    readings
        .into_iter()
        .map(|r| {
            if r.kind == fault.kind && (fault.start..=fault.end).contains(&r.tick) {
                SensorReading { value: r.value.shifted(fault.offset), ..r }
            } else {
                r
            }
        })
        .collect()
}

/// Shifts readings of `fault.kind` inside the window by `fault.offset`. The
/// window must lie inside the stream's tick span.
pub fn inject_fault(readings: &[SensorReading], fault: &FaultSpec) -> Result<Vec<SensorReading>, TelemetryError> {
    let duration = readings.iter().map(|r| r.tick + 1).max().unwrap_or(0);
    check_window(fault, duration)?;
    Ok(apply(readings.to_vec(), fault))
}

/// Seed for a sub-stream, derived from the scenario seed and a label.
pub fn derive_seed(seed: u64, label: &str) -> u64 {
    let mut enc = Encoder::new();
    enc.str("oilchain/stream").u64(seed).str(label);
    let h = Hash32::digest(&enc.finish());
    u64::from_be_bytes(h.as_bytes()[..8].try_into().expect("8 bytes"))
}
