use serde::{Deserialize, Serialize};

use super::FireCandidate;
use crate::frames::EnuPoint;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalizedFire {
    pub id: u32,
    pub position: EnuPoint,
    pub covariance_proxy: f64,
    pub observations: u32,
    pub last_seen: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrackConfig {
    pub gate_m: f64,
    pub alpha: f64,
    pub retire_after_s: f64,
}

impl Default for TrackConfig {
    fn default() -> Self {
        Self { gate_m: 3.0, alpha: 0.3, retire_after_s: 60.0 }
    }
}

/// Fused fire tracks.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrackStore {
    pub cfg: TrackConfig,
    pub tracks: Vec<LocalizedFire>,
    next_id: u32,
}

impl TrackStore {
    pub fn new(cfg: TrackConfig) -> Self {
        Self { cfg, tracks: Vec::new(), next_id: 1 }
    }

    pub fn get(&self, id: u32) -> Option<&LocalizedFire> {
        self.tracks.iter().find(|t| t.id == id)
    }

    /// Offset shared by a batch of candidates relative to the tracks.
    ///
    /// Candidates from one keyframe share its scale error, so they tend to be
    /// displaced together. Component-wise median over mutually nearest pairs
    /// within twice the gate; zero when there are none.
    fn common_shift(&self, candidates: &[FireCandidate]) -> EnuPoint {
        let reach = 2.0 * self.cfg.gate_m;
        let nearest = |p: &EnuPoint, pts: &mut dyn Iterator<Item = EnuPoint>| {
            pts.enumerate()
                .map(|(i, q)| (i, q.distance(p)))
                .min_by(|a, b| a.1.total_cmp(&b.1))
        };
        let mut offsets: Vec<EnuPoint> = Vec::new();
        for (ci, c) in candidates.iter().enumerate() {
            let Some((ti, d)) = nearest(&c.position, &mut self.tracks.iter().map(|t| t.position)) else { break };
            if d > reach {
                continue;
            }
            let t = self.tracks[ti].position;
            if nearest(&t, &mut candidates.iter().map(|c| c.position)).is_some_and(|(back, _)| back == ci) {
                offsets.push(t - c.position);
            }
        }
        if offsets.is_empty() {
            return EnuPoint::ORIGIN;
        }
        let median = |f: fn(&EnuPoint) -> f64| {
            let mut v: Vec<f64> = offsets.iter().map(f).collect();
            v.sort_by(f64::total_cmp);
            let m = v.len() / 2;
            if v.len() % 2 == 0 { 0.5 * (v[m - 1] + v[m]) } else { v[m] }
        };
        EnuPoint::new(median(|p| p.e), median(|p| p.n), median(|p| p.u))
    }

    /// Associate candidates to tracks by nearest neighbor within the gate,
    /// after removing the batch's common offset. Matched tracks are smoothed
    /// with the raw candidate, unmatched candidates open new tracks, then stale
    /// tracks retire and any pair inside one gate merges.
    pub fn fuse(&mut self, candidates: &[FireCandidate], now: f64) {
        let gate = self.cfg.gate_m;
        let shift = self.common_shift(candidates);
        let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
        for (ci, c) in candidates.iter().enumerate() {
            for (ti, t) in self.tracks.iter().enumerate() {
                let d = (c.position + shift).distance(&t.position);
                if d <= gate {
                    pairs.push((d, ci, ti));
                }
            }
        }
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then((a.1, a.2).cmp(&(b.1, b.2))));
        let mut cand_used = vec![false; candidates.len()];
        let mut track_used = vec![false; self.tracks.len()];
        let a = self.cfg.alpha;
        for (_, ci, ti) in pairs {
            if cand_used[ci] || track_used[ti] {
                continue;
            }
            cand_used[ci] = true;
            track_used[ti] = true;
            let c = &candidates[ci];
            let t = &mut self.tracks[ti];
            t.position = t.position * (1.0 - a) + c.position * a;
            t.covariance_proxy = t.covariance_proxy * (1.0 - a) + c.covariance_m * a;
            t.observations += 1;
            t.last_seen = t.last_seen.max(c.stamp);
        }
        for (ci, c) in candidates.iter().enumerate() {
            if cand_used[ci] {
                continue;
            }
            if self.next_id == 0 {
                self.next_id = 1;
            }
            self.tracks.push(LocalizedFire {
                id: self.next_id,
                position: c.position,
                covariance_proxy: c.covariance_m,
                observations: 1,
                last_seen: c.stamp,
            });
            self.next_id += 1;
        }

        let retire = self.cfg.retire_after_s;
        self.tracks.retain(|t| now - t.last_seen <= retire);
        self.merge_close();
    }

    fn merge_close(&mut self) {
        let gate = self.cfg.gate_m;
        loop {
            let mut best: Option<(f64, usize, usize)> = None;
            for i in 0..self.tracks.len() {
                for j in i + 1..self.tracks.len() {
                    let d = self.tracks[i].position.distance(&self.tracks[j].position);
                    if d <= gate && best.is_none_or(|b| d < b.0) {
                        best = Some((d, i, j));
                    }
                }
            }
            let Some((_, i, j)) = best else { return };
            let other = self.tracks.remove(j);
            let t = &mut self.tracks[i];
            let (wa, wb) = (t.observations as f64, other.observations as f64);
            t.position = (t.position * wa + other.position * wb) * (1.0 / (wa + wb));
            t.covariance_proxy = (t.covariance_proxy * wa + other.covariance_proxy * wb) / (wa + wb);
            t.observations += other.observations;
            t.last_seen = t.last_seen.max(other.last_seen);
            t.id = t.id.min(other.id);
        }
    }
}
