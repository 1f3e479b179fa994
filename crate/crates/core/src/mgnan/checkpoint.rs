use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{MGnanModel, ModelError, Result};

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Checkpoint {
    version: u32,
    model: MGnanModel,
}

pub fn to_json(model: &MGnanModel) -> Result<String> {
    serde_json::to_string_pretty(&Checkpoint {
        version: CHECKPOINT_VERSION,
        model: model.clone(),
    })
    .map_err(|e| ModelError::Checkpoint(e.to_string()))
}

pub fn from_json(text: &str) -> Result<MGnanModel> {
    #[derive(Deserialize)]
    struct Header {
        version: u32,
    }
    let header: Header =
        serde_json::from_str(text).map_err(|e| ModelError::Checkpoint(e.to_string()))?;
    if header.version != CHECKPOINT_VERSION {
        return Err(ModelError::Version(header.version));
    }
    let ck: Checkpoint =
        serde_json::from_str(text).map_err(|e| ModelError::Checkpoint(e.to_string()))?;
    validate(&ck.model)?;
    Ok(ck.model)
}

fn validate(m: &MGnanModel) -> Result<()> {
    let bad = |msg: String| Err(ModelError::Checkpoint(msg));
    if m.shapes.len() != m.grouping.len() {
        return bad("shape function count differs from group count".into());
    }
    for (g, s) in m.shapes.iter().enumerate() {
        if s.layers.is_empty()
            || s.input_width() != m.grouping.groups()[g].len()
            || s.output_width() != m.channels
        {
            return bad(format!("shape function {g} has widths {:?}", s.widths()));
        }
        for (a, b) in s.layers.iter().zip(s.layers.iter().skip(1)) {
            if a.outputs != b.inputs {
                return bad(format!("shape function {g} layers do not chain"));
            }
        }
        if s.layers
            .iter()
            .any(|l| l.weights.len() != l.inputs * l.outputs || l.bias.len() != l.outputs)
        {
            return bad(format!("shape function {g} has mis-sized parameters"));
        }
    }
    if m.rho.increments.is_empty() {
        return bad("decay has no segments".into());
    }
    Ok(())
}

pub fn save_checkpoint(model: &MGnanModel, path: &Path) -> Result<()> {
    let text = to_json(model)?;
    let mut f = fs::File::create(path)?;
    f.write_all(text.as_bytes())?;
    f.write_all(b"\n")?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<MGnanModel> {
    from_json(&fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mgnan::encode::tests::random_model;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn roundtrip_is_bit_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        for _ in 0..10 {
            let m = random_model(5, &mut rng);
            let back = from_json(&to_json(&m).unwrap()).unwrap();
            let (a, b) = (m.params(), back.params());
            assert!(a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits()));
            assert_eq!(back, m);
        }
        let dir = tempfile::tempdir().unwrap();
        let m = random_model(3, &mut rng);
        let p = dir.path().join("model.json");
        save_checkpoint(&m, &p).unwrap();
        assert_eq!(load_checkpoint(&p).unwrap(), m);
    }

    #[test]
    fn rejects_other_versions_and_bad_shapes() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let m = random_model(4, &mut rng);
        let text = to_json(&m)
            .unwrap()
            .replacen("\"version\": 1", "\"version\": 9", 1);
        assert!(matches!(from_json(&text), Err(ModelError::Version(9))));
        let mut broken = m.clone();
        broken.channels += 1;
        assert!(from_json(&to_json(&broken).unwrap()).is_err());
    }
}
