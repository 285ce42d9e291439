use serde::{Deserialize, Serialize};

use super::PointResult;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Region {
    Guardband,
    Masked,
    Critical,
    Crash,
}

impl Region {
    pub fn as_str(self) -> &'static str {
        match self {
            Region::Guardband => "guardband",
            Region::Masked => "masked",
            Region::Critical => "critical",
            Region::Crash => "crash",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionTable {
    /// Highest swept voltage whose median fault count is non-zero.
    pub v_first_fault_mv: Option<u32>,
    /// Lowest voltage without accuracy loss: one step above the highest
    /// voltage whose median loss exceeds the threshold, or `v_crash_mv` when
    /// no voltage does.
    pub v_min_mv: u32,
    pub v_crash_mv: u32,
    pub loss_threshold_pp: f64,
    /// `(voltage, region)` for every swept voltage, descending.
    pub regions: Vec<(u32, Region)>,
    #[serde(default)]
    pub warnings: Vec<String>,
}

impl RegionTable {
    pub fn region_of(&self, v_mv: u32) -> Option<Region> {
        self.regions.iter().find(|(v, _)| *v == v_mv).map(|(_, r)| *r)
    }
}

/// Region of `v_mv` given the detected boundaries.
///
/// Guardband above the first faulty voltage, Masked from there down to
/// `v_min` inclusive, Critical below `v_min` down to `v_crash` inclusive, and
/// Crash below `v_crash`.
pub fn classify_voltage(v_mv: u32, v_first_fault_mv: Option<u32>, v_min_mv: u32, v_crash_mv: u32) -> Region {
    if v_mv < v_crash_mv {
        Region::Crash
    } else if v_first_fault_mv.is_none_or(|f| v_mv > f) {
        Region::Guardband
    } else if v_mv >= v_min_mv {
        Region::Masked
    } else {
        Region::Critical
    }
}

/// Detects region boundaries from aggregated sweep points.
///
/// Points may come in any order. When a voltage below the first loss
/// crossing is safe again, the first crossing (scanning down from `v_nom`)
/// still defines `v_min` and a warning is recorded.
pub fn detect_regions(points: &[PointResult], v_crash_mv: u32, step_mv: u32, loss_threshold_pp: f64) -> RegionTable {
    let mut pts: Vec<&PointResult> = points.iter().collect();
    pts.sort_by_key(|p| std::cmp::Reverse(p.voltage_mv));

    let v_first_fault_mv = pts.iter().find(|p| p.fault_count_median > 0.0).map(|p| p.voltage_mv);
    let lossy = |p: &&PointResult| p.loss_pp_median > loss_threshold_pp;
    let mut warnings = Vec::new();
    let v_min_mv = match pts.iter().position(lossy) {
        None => v_crash_mv,
        Some(i) => {
            let crossing = pts[i].voltage_mv;
            let recovered: Vec<u32> = pts[i + 1..]
                .iter()
                .filter(|p| !lossy(p) && p.voltage_mv >= v_crash_mv)
                .map(|p| p.voltage_mv)
                .collect();
            if !recovered.is_empty() {
                let msg = format!(
                    "accuracy loss is not monotone: loss above {loss_threshold_pp} pp first at {crossing} mV \
                     but below threshold again at {recovered:?} mV"
                );
                log::warn!("{msg}");
                warnings.push(msg);
            }
            let above = pts[..i].last().map_or(crossing + step_mv, |p| p.voltage_mv);
            above.min(crossing + step_mv)
        }
    };
    let regions = pts
        .iter()
        .map(|p| (p.voltage_mv, classify_voltage(p.voltage_mv, v_first_fault_mv, v_min_mv, v_crash_mv)))
        .collect();
    RegionTable {
        v_first_fault_mv,
        v_min_mv,
        v_crash_mv,
        loss_threshold_pp,
        regions,
        warnings,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn point(v: u32, faults: f64, loss: f64) -> PointResult {
        PointResult {
            voltage_mv: v,
            fault_count_median: faults,
            loss_pp_median: loss,
            ..PointResult::default()
        }
    }

    fn synthetic(losses: &[(u32, f64, f64)]) -> Vec<PointResult> {
        losses.iter().map(|&(v, f, l)| point(v, f, l)).collect()
    }

    #[test]
    fn first_fault_readout() {
        let pts = synthetic(&[(615, 0.0, 0.0), (605, 0.0, 0.0), (595, 2.0, 0.0), (585, 9.0, 0.0)]);
        let t = detect_regions(&pts, 585, 10, 0.1);
        assert_eq!(t.v_first_fault_mv, Some(595));
        assert_eq!(t.v_min_mv, 585);
        assert_eq!(t.region_of(605), Some(Region::Guardband));
        assert_eq!(t.region_of(595), Some(Region::Masked));
        assert_eq!(t.region_of(585), Some(Region::Masked));
    }

    #[test]
    fn all_zero_losses_mean_no_critical_region() {
        let pts = synthetic(&[(560, 0.0, 0.0), (550, 1.0, 0.0), (540, 5.0, 0.0)]);
        let t = detect_regions(&pts, 540, 10, 0.1);
        assert_eq!(t.v_min_mv, 540);
        assert!(t.regions.iter().all(|(_, r)| *r != Region::Critical));
        assert!(t.warnings.is_empty());
    }

    #[test]
    fn vmin_is_lowest_safe_voltage() {
        let pts = synthetic(&[
            (620, 0.0, 0.0),
            (610, 1.0, 0.0),
            (600, 10.0, 0.0),
            (590, 50.0, 0.05),
            (580, 200.0, 0.3),
            (570, 900.0, 0.8),
        ]);
        let t = detect_regions(&pts, 570, 10, 0.1);
        assert_eq!(t.v_min_mv, 590);
        assert_eq!(
            t.regions,
            vec![
                (620, Region::Guardband),
                (610, Region::Masked),
                (600, Region::Masked),
                (590, Region::Masked),
                (580, Region::Critical),
                (570, Region::Critical),
            ]
        );
    }

    #[test]
    fn non_monotone_loss_warns_and_keeps_first_crossing() {
        let pts = synthetic(&[(600, 1.0, 0.0), (590, 5.0, 0.2), (580, 9.0, 0.05), (570, 20.0, 1.0)]);
        let t = detect_regions(&pts, 570, 10, 0.1);
        assert_eq!(t.v_min_mv, 600);
        assert_eq!(t.warnings.len(), 1);
    }

    #[test]
    fn crash_below_vcrash() {
        assert_eq!(classify_voltage(530, Some(600), 560, 540), Region::Crash);
        assert_eq!(classify_voltage(540, Some(600), 560, 540), Region::Critical);
        assert_eq!(classify_voltage(700, None, 540, 540), Region::Guardband);
    }
}
