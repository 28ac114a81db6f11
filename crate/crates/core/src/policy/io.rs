use std::fmt::Write as _;
use std::path::Path;

use super::PolicyNetwork;
use crate::error::{io_err, Error, Result};

/// Header `in h1 h2 out`, then W1 row by row, b1, W2, b2, W3, b3.
/// Values use 17 significant digits, which round-trips every f64.
pub fn to_text(net: &PolicyNetwork) -> String {
    let s = net.sizes();
    let mut out = format!("{} {} {} {}\n", s[0], s[1], s[2], s[3]);
    for layer in 0..3 {
        let (w, b) = net.layer_range(layer);
        for row in net.params()[w].chunks_exact(s[layer]) {
            write_line(&mut out, row);
        }
        write_line(&mut out, &net.params()[b]);
    }
    out
}

fn write_line(out: &mut String, values: &[f64]) {
    for (i, v) in values.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        write!(out, "{v:.16e}").unwrap();
    }
    out.push('\n');
}

pub fn from_text(text: &str) -> Result<PolicyNetwork> {
    let mut tok = text.split_whitespace();
    let mut sizes = [0usize; 4];
    for s in &mut sizes {
        *s = tok
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| Error::Format("weight file header must be `in h1 h2 out`".into()))?;
    }
    let params = tok
        .map(|t| t.parse::<f64>().map_err(|_| Error::Format(format!("bad weight value `{t}`"))))
        .collect::<Result<Vec<_>>>()?;
    if params.iter().any(|p| !p.is_finite()) {
        return Err(Error::NonFiniteParameter);
    }
    PolicyNetwork::from_parts(sizes, params)
}

pub fn save_weights(net: &PolicyNetwork, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, to_text(net)).map_err(io_err(path))
}

/// Loads a weight file; `input` pins the expected state size when given.
pub fn load_weights(path: impl AsRef<Path>, input: Option<usize>) -> Result<PolicyNetwork> {
    let path = path.as_ref();
    let net = from_text(&std::fs::read_to_string(path).map_err(io_err(path))?)?;
    match input {
        Some(n) if n != net.input_size() => Err(Error::DimensionMismatch { expected: n, actual: net.input_size() }),
        _ => Ok(net),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exec::rng_from;
    use crate::policy::tests::random_net;
    use rand::Rng;

    #[test]
    fn round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("w.txt");
        let net = random_net([6, 9, 7, 8], 12);
        save_weights(&net, &path).unwrap();
        let back = load_weights(&path, Some(6)).unwrap();
        assert!(net.params().iter().zip(back.params()).all(|(a, b)| a.to_bits() == b.to_bits()));
        let mut rng = rng_from(0);
        for _ in 0..100 {
            let s: Vec<f64> = (0..6).map(|_| rng.gen_range(-3.0..3.0)).collect();
            assert_eq!(net.forward(&s).unwrap(), back.forward(&s).unwrap());
        }
    }

    #[test]
    fn wrong_input_size_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("w.txt");
        save_weights(&random_net([6, 4, 4, 8], 1), &path).unwrap();
        assert!(matches!(load_weights(&path, Some(8)), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn truncated_file_rejected() {
        let text = to_text(&random_net([3, 4, 4, 8], 1));
        let cut = &text[..text.len() / 2];
        let cut = &cut[..cut.rfind(char::is_whitespace).unwrap()];
        assert!(from_text(cut).is_err());
        assert!(from_text("3 4 4").is_err());
        assert!(from_text("3 4 4 7\n").is_err());
    }
}
