//! Handover and service KPIs computed from the event log and link records.

use thiserror::Error;

use crate::handover::HoEvent;
use crate::scenario::{BsId, ScenarioConfig};

#[derive(Debug, Error, PartialEq)]
pub enum KpiError {
    #[error("link rate is zero (outage): latency undefined")]
    UndefinedRate,
    #[error("reference KPI is zero: relative gain undefined")]
    UndefinedGain,
}

/// Serving-link state of one UE during one step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkRecord {
    pub step: u64,
    pub ue_id: usize,
    pub serving_bs: BsId,
    pub rsrp_dbm: f64,
    pub sinr_db: f64,
    pub distance_m: f64,
    /// Share of the serving cell's bandwidth, Hz.
    pub bandwidth_hz: f64,
    /// A handover (successful or not) was executed for this UE this step.
    pub ho_executed: bool,
}

/// Handovers (successes and failures) per UE per step.
pub fn ho_ratio(events: &[HoEvent], ue_count: usize, total_steps: u64) -> f64 {
    let denom = ue_count as f64 * total_steps as f64;
    if denom == 0.0 {
        0.0
    } else {
        events.len() as f64 / denom
    }
}

fn fraction(count: usize, total: usize) -> f64 {
    if total == 0 {
        0.0
    } else {
        count as f64 / total as f64
    }
}

pub fn pingpong_ratio(events: &[HoEvent]) -> f64 {
    fraction(events.iter().filter(|e| e.pingpong).count(), events.len())
}

pub fn failure_ratio(events: &[HoEvent]) -> f64 {
    fraction(events.iter().filter(|e| e.outcome.is_failure()).count(), events.len())
}

/// Shannon rate `B log2(1 + 10^(sinr/10))`, bit/s.
pub fn throughput(bandwidth_hz: f64, sinr_db: f64) -> f64 {
    bandwidth_hz * (1.0 + 10f64.powf(sinr_db / 10.0)).log2()
}

/// Transmission time of one packet plus distance-proportional edge
/// propagation latency plus handover interruption, seconds.
pub fn latency(
    packet_bits: f64,
    rate_bps: f64,
    distance_m: f64,
    edge_distance_m: f64,
    edge_latency_s: f64,
    ho_latency_s: f64,
) -> Result<f64, KpiError> {
    if !(rate_bps > 0.0) {
        return Err(KpiError::UndefinedRate);
    }
    Ok(packet_bits / rate_bps + edge_latency_s * distance_m / edge_distance_m + ho_latency_s)
}

/// `(proposed - competitor) / proposed`.
pub fn gain(kpi_proposed: f64, kpi_competitor: f64) -> Result<f64, KpiError> {
    if kpi_proposed == 0.0 {
        return Err(KpiError::UndefinedGain);
    }
    Ok((kpi_proposed - kpi_competitor) / kpi_proposed)
}

/// Constants needed to turn records into KPIs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KpiContext {
    pub ue_count: usize,
    pub total_steps: u64,
    pub step_seconds: f64,
    pub packet_bits: f64,
    pub edge_distance_m: f64,
    pub edge_latency_s: f64,
    pub ho_latency_s: f64,
    /// Serving SINR below which the link carries no data, dB.
    pub outage_sinr_db: f64,
}

impl KpiContext {
    pub fn from_config(c: &ScenarioConfig, total_steps: u64) -> Self {
        Self {
            ue_count: c.ue_count,
            total_steps,
            step_seconds: c.step_seconds,
            packet_bits: c.packet_bytes * 8.0,
            edge_distance_m: c.bs_spacing_m,
            edge_latency_s: c.edge_latency_ms * 1e-3,
            ho_latency_s: c.ho_latency_s(),
            outage_sinr_db: c.outage_sinr_db,
        }
    }

    /// Achievable rate of a record; zero in outage.
    pub fn rate(&self, r: &LinkRecord) -> f64 {
        if r.sinr_db < self.outage_sinr_db {
            0.0
        } else {
            throughput(r.bandwidth_hz, r.sinr_db)
        }
    }

    pub fn latency_of(&self, r: &LinkRecord) -> Result<f64, KpiError> {
        let ho = if r.ho_executed { self.ho_latency_s } else { 0.0 };
        latency(
            self.packet_bits,
            self.rate(r),
            r.distance_m,
            self.edge_distance_m,
            self.edge_latency_s,
            ho,
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepKpi {
    pub step: u64,
    pub handovers: usize,
    pub pingpongs: usize,
    pub failures: usize,
    pub sum_throughput_bps: f64,
    pub mean_latency_s: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KpiReport {
    pub ue_count: usize,
    pub total_steps: u64,
    pub step_seconds: f64,
    pub handovers: usize,
    pub pingpongs: usize,
    pub failures: usize,
    pub ho_ratio: f64,
    pub pingpong_ratio: f64,
    pub failure_ratio: f64,
    /// Per-step sum over UEs, averaged over steps, bit/s.
    pub sum_throughput_bps: f64,
    /// Mean over all non-outage UE-steps; `None` when there are none.
    pub mean_latency_s: Option<f64>,
    /// UE-steps excluded from the latency mean.
    pub outage_samples: usize,
    pub series: Vec<StepKpi>,
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "undefined".to_string(), |x| x.to_string())
}

impl KpiReport {
    /// `links` must be ordered by step; steps without records still appear in
    /// the series.
    pub fn compute(events: &[HoEvent], links: &[LinkRecord], ctx: &KpiContext) -> Self {
        let steps = ctx.total_steps as usize;
        let mut series: Vec<StepKpi> = (0..steps)
            .map(|s| StepKpi {
                step: s as u64,
                handovers: 0,
                pingpongs: 0,
                failures: 0,
                sum_throughput_bps: 0.0,
                mean_latency_s: None,
            })
            .collect();
        for e in events {
            if let Some(s) = series.get_mut(e.step as usize) {
                s.handovers += 1;
                s.pingpongs += e.pingpong as usize;
                s.failures += e.outcome.is_failure() as usize;
            }
        }
        let mut latency_sum = vec![0.0; steps];
        let mut latency_n = vec![0usize; steps];
        let mut outage_samples = 0;
        for r in links {
            let Some(s) = series.get_mut(r.step as usize) else {
                continue;
            };
            s.sum_throughput_bps += ctx.rate(r);
            match ctx.latency_of(r) {
                Ok(l) => {
                    latency_sum[r.step as usize] += l;
                    latency_n[r.step as usize] += 1;
                }
                Err(_) => outage_samples += 1,
            }
        }
        for (i, s) in series.iter_mut().enumerate() {
            if latency_n[i] > 0 {
                s.mean_latency_s = Some(latency_sum[i] / latency_n[i] as f64);
            }
        }
        let total_n: usize = latency_n.iter().sum();
        let mean_latency_s = (total_n > 0).then(|| latency_sum.iter().sum::<f64>() / total_n as f64);
        let sum_throughput_bps = if steps == 0 {
            0.0
        } else {
            series.iter().map(|s| s.sum_throughput_bps).sum::<f64>() / steps as f64
        };
        Self {
            ue_count: ctx.ue_count,
            total_steps: ctx.total_steps,
            step_seconds: ctx.step_seconds,
            handovers: events.len(),
            pingpongs: events.iter().filter(|e| e.pingpong).count(),
            failures: events.iter().filter(|e| e.outcome.is_failure()).count(),
            ho_ratio: ho_ratio(events, ctx.ue_count, ctx.total_steps),
            pingpong_ratio: pingpong_ratio(events),
            failure_ratio: failure_ratio(events),
            sum_throughput_bps,
            mean_latency_s,
            outage_samples,
            series,
        }
    }

    pub fn summary_csv(&self) -> String {
        let rows = [
            ("ue_count", self.ue_count.to_string()),
            ("total_steps", self.total_steps.to_string()),
            ("step_seconds", self.step_seconds.to_string()),
            ("handovers", self.handovers.to_string()),
            ("pingpongs", self.pingpongs.to_string()),
            ("failures", self.failures.to_string()),
            ("ho_ratio", self.ho_ratio.to_string()),
            ("pingpong_ratio", self.pingpong_ratio.to_string()),
            ("failure_ratio", self.failure_ratio.to_string()),
            ("sum_throughput_bps", self.sum_throughput_bps.to_string()),
            ("mean_latency_s", opt(self.mean_latency_s)),
            ("outage_samples", self.outage_samples.to_string()),
        ];
        let mut out = String::from("kpi,value\n");
        for (k, v) in rows {
            out.push_str(&format!("{k},{v}\n"));
        }
        out
    }

    pub fn series_csv(&self) -> String {
        let mut out = String::from("step,handovers,pingpongs,failures,sum_throughput_bps,mean_latency_s\n");
        for s in &self.series {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                s.step,
                s.handovers,
                s.pingpongs,
                s.failures,
                s.sum_throughput_bps,
                opt(s.mean_latency_s)
            ));
        }
        out
    }
}

pub const LINK_HEADER: &str = "step,ue,serving,rsrp_dbm,sinr_db,distance_m,bandwidth_hz,ho_executed";

pub fn links_to_csv(links: &[LinkRecord]) -> String {
    let mut out = format!("{LINK_HEADER}\n");
    for r in links {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.step, r.ue_id, r.serving_bs, r.rsrp_dbm, r.sinr_db, r.distance_m, r.bandwidth_hz, r.ho_executed as u8
        ));
    }
    out
}
