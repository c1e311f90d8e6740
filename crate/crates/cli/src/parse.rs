//! Text forms for matrices, lists and Gaussian integers.

use sl2lab::{FieldCtx, Fp, GaussInt, LabError, Mat2, Result};

fn bad(what: &str, s: &str) -> LabError {
    LabError::Invalid(format!("cannot parse {what} '{s}'"))
}

pub fn ints(s: &str) -> Result<Vec<i64>> {
    if s.trim().is_empty() {
        return Ok(Vec::new());
    }
    s.split(',').map(|x| x.trim().parse().map_err(|_| bad("integer list", s))).collect()
}

pub fn elems(f: &FieldCtx, s: &str) -> Result<Vec<Fp>> {
    Ok(ints(s)?.into_iter().map(|x| f.elem(x)).collect())
}

/// `w`, `id`, `u:s`, `ustar:s`, or four entries `a,b,c,d`.
pub fn mat(f: &FieldCtx, s: &str) -> Result<Mat2> {
    let s = s.trim();
    match s {
        "w" => return Ok(Mat2::w(f)),
        "id" => return Ok(Mat2::identity(f)),
        _ => {}
    }
    if let Some(x) = s.strip_prefix("u:") {
        return Ok(Mat2::u(f, f.elem(x.trim().parse().map_err(|_| bad("matrix", s))?)));
    }
    if let Some(x) = s.strip_prefix("ustar:") {
        return Ok(Mat2::u_star(f, f.elem(x.trim().parse().map_err(|_| bad("matrix", s))?)));
    }
    let e = ints(s)?;
    let e: [i64; 4] = e.try_into().map_err(|_| bad("matrix", s))?;
    Mat2::from_ints(f, e)
}

/// Matrices separated by `;`.
pub fn mats(f: &FieldCtx, s: &str) -> Result<Vec<Mat2>> {
    s.split(';').filter(|x| !x.trim().is_empty()).map(|x| mat(f, x)).collect()
}

/// Integer tuples separated by `;`, entries by `,`.
pub fn tuples(s: &str) -> Result<Vec<Vec<i64>>> {
    s.split(';').filter(|x| !x.trim().is_empty()).map(ints).collect()
}

pub fn pairs(s: &str) -> Result<Vec<(i64, i64)>> {
    tuples(s)?
        .into_iter()
        .map(|t| match t[..] {
            [a, b] => Ok((a, b)),
            _ => Err(bad("pair list", s)),
        })
        .collect()
}

pub fn gauss(s: &str) -> Result<GaussInt> {
    s.parse().map_err(|_| bad("Gaussian integer", s))
}

pub fn mat_string(m: &Mat2) -> String {
    m.to_string()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn forms() {
        let f = FieldCtx::new(13).unwrap();
        assert_eq!(mat(&f, "w").unwrap(), Mat2::w(&f));
        assert_eq!(mat(&f, "0,-1,1,0").unwrap(), Mat2::w(&f));
        assert_eq!(mat(&f, "u:3").unwrap(), Mat2::u(&f, f.elem(3)));
        assert!(mat(&f, "1,2,3").is_err());
        assert!(mat(&f, "1,2,2,4").is_err());
        assert_eq!(mats(&f, "w;id").unwrap().len(), 2);
        assert_eq!(pairs("1,2;3,4").unwrap(), vec![(1, 2), (3, 4)]);
        assert!(pairs("1,2,3").is_err());
        assert_eq!(ints("").unwrap(), Vec::<i64>::new());
    }
}
