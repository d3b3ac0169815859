//! Conversions between flat row-major buffers and the nested arrays used in
//! definition files.

use crate::error::{Error, Result};

pub type N3 = Vec<Vec<Vec<f64>>>;
pub type N4 = Vec<Vec<Vec<Vec<f64>>>>;
pub type N5 = Vec<Vec<Vec<Vec<Vec<f64>>>>>;

pub fn nest3(flat: &[f64], d: [usize; 3]) -> N3 {
    flat.chunks(d[1] * d[2]).map(|c| c.chunks(d[2]).map(<[f64]>::to_vec).collect()).collect()
}

pub fn nest4(flat: &[f64], d: [usize; 4]) -> N4 {
    flat.chunks(d[1] * d[2] * d[3]).map(|c| nest3(c, [d[1], d[2], d[3]])).collect()
}

pub fn nest5(flat: &[f64], d: [usize; 5]) -> N5 {
    flat.chunks(d[1] * d[2] * d[3] * d[4]).map(|c| nest4(c, [d[1], d[2], d[3], d[4]])).collect()
}

fn expect(what: &str, path: &str, got: usize, want: usize) -> Result<()> {
    if got != want {
        return Err(Error::Shape(format!("{what}{path}: expected {want} entries, got {got}")));
    }
    Ok(())
}

pub fn flatten3(what: &str, n: &N3, d: [usize; 3]) -> Result<Vec<f64>> {
    expect(what, "", n.len(), d[0])?;
    let mut out = Vec::with_capacity(d.iter().product());
    for (i, a) in n.iter().enumerate() {
        expect(what, &format!("[{i}]"), a.len(), d[1])?;
        for (j, b) in a.iter().enumerate() {
            expect(what, &format!("[{i}][{j}]"), b.len(), d[2])?;
            out.extend_from_slice(b);
        }
    }
    Ok(out)
}

pub fn flatten4(what: &str, n: &N4, d: [usize; 4]) -> Result<Vec<f64>> {
    expect(what, "", n.len(), d[0])?;
    let mut out = Vec::with_capacity(d.iter().product());
    for (i, a) in n.iter().enumerate() {
        out.extend(flatten3(&format!("{what}[{i}]"), a, [d[1], d[2], d[3]])?);
    }
    Ok(out)
}

pub fn flatten5(what: &str, n: &N5, d: [usize; 5]) -> Result<Vec<f64>> {
    expect(what, "", n.len(), d[0])?;
    let mut out = Vec::with_capacity(d.iter().product());
    for (i, a) in n.iter().enumerate() {
        out.extend(flatten4(&format!("{what}[{i}]"), a, [d[1], d[2], d[3], d[4]])?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nest_then_flatten() {
        let flat: Vec<f64> = (0..120).map(f64::from).collect();
        let d = [2, 3, 2, 5, 2];
        assert_eq!(flatten5("t", &nest5(&flat, d), d).unwrap(), flat);
        let mut bad = nest4(&flat, [2, 3, 4, 5]);
        bad[1][2][3].pop();
        let err = flatten4("t", &bad, [2, 3, 4, 5]).unwrap_err().to_string();
        assert!(err.contains("t[1][2][3]"), "{err}");
    }
}
