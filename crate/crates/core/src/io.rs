//! Text entry points for every on-disk format. Each one validates fully, so
//! a successful parse yields a value that upholds its type's invariants.

use crate::baseline::NnTransferMap;
use crate::error::Result;
use crate::kinematics::{DatasetFile, SerialManipulator};
use crate::matching::CorrespondenceSet;
use crate::registration::RigidSpdTransform;
use crate::spd::{SpdCloud, SpdMatrix};

pub fn parse_spd_matrix(text: &str) -> Result<SpdMatrix> {
    SpdMatrix::from_json(text)
}

pub fn parse_cloud(text: &str) -> Result<SpdCloud> {
    Ok(serde_json::from_str(text)?)
}

pub fn parse_correspondences(text: &str) -> Result<CorrespondenceSet> {
    CorrespondenceSet::from_json(text)
}

pub fn parse_transform(text: &str) -> Result<RigidSpdTransform> {
    RigidSpdTransform::from_json(text)
}

pub fn parse_model(text: &str) -> Result<SerialManipulator> {
    SerialManipulator::from_json(text)
}

pub fn parse_dataset(text: &str) -> Result<DatasetFile> {
    DatasetFile::from_json(text)
}

pub fn parse_nn_map(text: &str) -> Result<NnTransferMap> {
    NnTransferMap::from_json(text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn garbage_is_rejected_everywhere() {
        for text in ["", "{", "null", "[]", "{\"dim\":2}"] {
            assert!(parse_spd_matrix(text).is_err());
            assert!(parse_cloud(text).is_err());
            assert!(parse_correspondences(text).is_err());
            assert!(parse_transform(text).is_err());
            assert!(parse_model(text).is_err());
            assert!(parse_dataset(text).is_err());
            assert!(parse_nn_map(text).is_err());
        }
    }

    #[test]
    fn cloud_round_trip() {
        let c = SpdCloud::new(vec![SpdMatrix::identity(2), SpdMatrix::from_diagonal(&[1.0, 3.0]).unwrap()]).unwrap();
        assert_eq!(parse_cloud(&serde_json::to_string(&c).unwrap()).unwrap(), c);
    }
}
