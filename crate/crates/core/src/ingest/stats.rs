use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::parse::ReviewRecord;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StatsReport {
    pub users: usize,
    pub items: usize,
    pub ratings: usize,
    /// `ratings / (users · items)`, 0 for an empty input.
    pub density: f64,
}

pub fn dataset_stats(records: &[ReviewRecord]) -> StatsReport {
    let users: HashSet<&str> = records.iter().map(|r| r.device_id.as_str()).collect();
    let items: HashSet<&str> = records.iter().map(|r| r.service_id.as_str()).collect();
    let cells = users.len() * items.len();
    let density = if cells == 0 {
        0.0
    } else {
        (records.len() as f64 / cells as f64).min(1.0)
    };
    StatsReport {
        users: users.len(),
        items: items.len(),
        ratings: records.len(),
        density,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(d: &str, s: &str) -> ReviewRecord {
        ReviewRecord {
            device_id: d.into(),
            service_id: s.into(),
            rating: 5.0,
            review_text: String::new(),
            timestamp: 0,
        }
    }

    #[test]
    fn single_record() {
        let s = dataset_stats(&[rec("d", "s")]);
        assert_eq!((s.users, s.items, s.ratings), (1, 1, 1));
        assert_eq!(s.density, 1.0);
    }

    #[test]
    fn density_is_ratings_over_cells() {
        let s = dataset_stats(&[rec("a", "x"), rec("a", "y"), rec("b", "x")]);
        assert_eq!((s.users, s.items, s.ratings), (2, 2, 3));
        assert_eq!(s.density, 0.75);
        assert_eq!(dataset_stats(&[]).density, 0.0);
    }

    #[test]
    fn appliances_scale_density() {
        // Table-sized counts: 11,342 ratings over 1,565 users and 1,052 items.
        let density: f64 = 11_342.0 / (1_565.0 * 1_052.0);
        assert!((density - 0.0069).abs() < 5e-5);
    }
}
