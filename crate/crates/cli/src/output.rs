//! CSV tables with fixed headers and 17 significant digits.

use num_complex::Complex64;
use piezo_core::beam::DerivedConstants;
use piezo_core::frequency::FrequencyPoint;
use piezo_core::observability::OddApproximant;
use piezo_core::spectral::ModeIndex;
use piezo_core::timedomain::Trajectory;

use crate::sweep::SweepRow;

/// `{:.16e}`, i.e. 17 significant digits; enough to round-trip any `f64`.
pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        "NaN".to_string()
    } else if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.to_string()
    } else {
        format!("{x:.16e}")
    }
}

fn table<I, R>(header: &[&str], rows: I) -> String
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(header).expect("writing to memory cannot fail");
    for r in rows {
        let rec: Vec<String> = r.into_iter().collect();
        w.write_record(&rec).expect("writing to memory cannot fail");
    }
    let bytes = w.into_inner().expect("flushing to memory cannot fail");
    String::from_utf8(bytes).expect("CSV output is UTF-8")
}

pub fn constants_csv(dc: &DerivedConstants) -> String {
    table(
        &["alpha", "zeta1", "zeta2", "b1", "b2"],
        [[dc.alpha, dc.zeta1, dc.zeta2, dc.b1, dc.b2].map(fmt_f64)],
    )
}

/// Reads back the first data row of [`constants_csv`].
pub fn parse_constants_csv(text: &str) -> Result<DerivedConstants, String> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let headers = r.headers().map_err(|e| e.to_string())?.clone();
    let expect = ["alpha", "zeta1", "zeta2", "b1", "b2"];
    if headers.iter().ne(expect.iter().copied()) {
        return Err(format!("unexpected header {headers:?}"));
    }
    let rec = r
        .records()
        .next()
        .ok_or("no data row")?
        .map_err(|e| e.to_string())?;
    let v: Vec<f64> = rec
        .iter()
        .map(|s| s.parse::<f64>().map_err(|e| format!("{s}: {e}")))
        .collect::<Result<_, _>>()?;
    if v.len() != 5 {
        return Err(format!("expected 5 columns, got {}", v.len()));
    }
    Ok(DerivedConstants {
        alpha: v[0],
        zeta1: v[1],
        zeta2: v[2],
        b1: v[3],
        b2: v[4],
    })
}

pub fn spectrum_csv(eigs: &[(ModeIndex, Complex64)]) -> String {
    table(
        &["family", "sign", "j", "im_lambda"],
        eigs.iter().map(|(m, l)| {
            [
                m.family.to_string(),
                m.sign.symbol().to_string(),
                m.j.to_string(),
                fmt_f64(l.im),
            ]
        }),
    )
}

pub fn trajectory_csv(traj: &Trajectory) -> String {
    table(
        &["time", "energy", "y"],
        (0..traj.times.len()).map(|i| [traj.times[i], traj.energies[i], traj.outputs[i]].map(fmt_f64)),
    )
}

/// One block of rows per stored snapshot.
pub fn snapshots_csv(traj: &Trajectory) -> String {
    table(
        &["time", "x", "v", "p", "vdot", "pdot"],
        traj.snapshots.iter().flat_map(|s| {
            let n = s.cells();
            (0..=n).map(move |i| {
                let x = s.length * i as f64 / n as f64;
                [s.t, x, s.v[i], s.p[i], s.vdot[i], s.pdot[i]].map(fmt_f64)
            })
        }),
    )
}

pub fn frequency_csv(points: &[FrequencyPoint]) -> String {
    table(
        &["re_s", "im_s", "re_G", "im_G", "abs_G"],
        points
            .iter()
            .map(|p| [p.s.re, p.s.im, p.g.re, p.g.im, p.g.norm()].map(fmt_f64)),
    )
}

/// Rows `(p, q, err, quotient)`.
pub fn observability_csv(rows: &[(OddApproximant, f64)]) -> String {
    table(
        &["p", "q", "err", "quotient"],
        rows.iter()
            .map(|(a, qv)| [a.p.to_string(), a.q.to_string(), fmt_f64(a.err), fmt_f64(*qv)]),
    )
}

pub fn approximants_csv(rows: &[OddApproximant]) -> String {
    table(
        &["p", "q", "err", "cq2"],
        rows.iter()
            .map(|a| [a.p.to_string(), a.q.to_string(), fmt_f64(a.err), fmt_f64(a.cq2)]),
    )
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    table(
        &["value", "metric", "error"],
        rows.iter()
            .map(|r| [fmt_f64(r.value), r.metric.clone(), r.error.clone().unwrap_or_default()]),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use piezo_core::beam::{derive_constants, BeamParameters};

    #[test]
    fn constants_round_trip_exactly() {
        for g in [1.0, 0.3, 0.5f64.sqrt(), 7.123456789e-3] {
            let p = BeamParameters {
                gamma: g,
                ..BeamParameters::unit()
            };
            let dc = derive_constants(&p).unwrap();
            let text = constants_csv(&dc);
            assert!(text.starts_with("alpha,zeta1,zeta2,b1,b2\n"));
            assert_eq!(parse_constants_csv(&text).unwrap(), dc);
        }
    }

    #[test]
    fn number_format() {
        assert_eq!(fmt_f64(1.0), "1.0000000000000000e0");
        assert_eq!(fmt_f64(f64::NAN), "NaN");
        let x = 0.1 + 0.2;
        assert_eq!(fmt_f64(x).parse::<f64>().unwrap(), x);
    }

    #[test]
    fn error_text_is_quoted() {
        let rows = vec![SweepRow {
            value: 0.0,
            metric: "NaN".into(),
            error: Some("parameter `gamma` must be strictly positive, got 0".into()),
        }];
        let text = sweep_csv(&rows);
        assert_eq!(text.lines().count(), 2);
        let mut r = csv::Reader::from_reader(text.as_bytes());
        let rec = r.records().next().unwrap().unwrap();
        assert!(rec[2].contains("gamma"));
    }
}
