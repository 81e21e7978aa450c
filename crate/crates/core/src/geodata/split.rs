//! Spatially disjoint dataset splits along an x-axis boundary.

use super::{Dataset, DatasetEntry, SplitTag, StreetMap, Trajectory};
use crate::error::{Error, Result};

/// Splits (map, trajectories) entries into train and test datasets by a
/// vertical boundary line at `boundary` meters on the x axis.
///
/// Entries whose extent lies entirely at or left of the boundary go to
/// Train, entirely at or right of it to Test. An extent with interior on
/// both sides is a validation error, so the two splits can never share
/// area.
pub fn spatial_split(
    entries: Vec<(StreetMap, Vec<Trajectory>)>,
    boundary: f64,
) -> Result<(Dataset, Dataset)> {
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (idx, (map, trajectories)) in entries.into_iter().enumerate() {
        let lo = map.extent.origin_x;
        let hi = map.extent.origin_x + map.extent.side;
        let entry = DatasetEntry { map, trajectories };
        if hi <= boundary {
            train.push(entry);
        } else if lo >= boundary {
            test.push(entry);
        } else {
            return Err(Error::validation(format!(
                "entry {idx} extent [{lo}, {hi}] straddles the split boundary {boundary}"
            )));
        }
    }
    Ok((
        Dataset {
            entries: train,
            split_tag: SplitTag::Train,
        },
        Dataset {
            entries: test,
            split_tag: SplitTag::Test,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geodata::Extent;

    fn map_at(origin_x: f64) -> StreetMap {
        let extent = Extent::new(origin_x, 0.0, 1920.0, 10.0).unwrap();
        StreetMap::new(extent, Vec::new()).unwrap()
    }

    #[test]
    fn entries_fall_on_their_side() {
        let (train, test) =
            spatial_split(vec![(map_at(0.0), vec![]), (map_at(2000.0), vec![])], 1960.0).unwrap();
        assert_eq!(train.entries.len(), 1);
        assert_eq!(test.entries.len(), 1);
        assert_eq!(train.split_tag, SplitTag::Train);
        assert_eq!(test.split_tag, SplitTag::Test);
        assert_eq!(train.entries[0].map.extent.origin_x, 0.0);
        assert_eq!(test.entries[0].map.extent.origin_x, 2000.0);
    }

    #[test]
    fn straddling_extent_is_rejected() {
        let result = spatial_split(vec![(map_at(1900.0), vec![])], 1960.0);
        assert!(matches!(result, Err(Error::Validation(_))));
    }

    #[test]
    fn split_is_exhaustive_and_disjoint() {
        let origins: Vec<f64> = (0..10).map(|k| k as f64 * 2000.0).collect();
        let entries: Vec<_> = origins.iter().map(|&x| (map_at(x), vec![])).collect();
        let (train, test) = spatial_split(entries, 9960.0).unwrap();
        assert_eq!(train.entries.len() + test.entries.len(), 10);
        for a in &train.entries {
            for b in &test.entries {
                assert!(
                    !a.map.extent.overlaps(&b.map.extent),
                    "train and test extents overlap"
                );
            }
        }
    }
}
