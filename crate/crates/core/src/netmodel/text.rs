//! Line-oriented text format for an instance plus its channel realization.
//!
//! ```text
//! K N S sigma2 Pmax Pd A V logbase
//! s R_s                  (S lines)
//! k sp x y               (K lines)
//! k n h                  (K*N lines)
//! ```
//!
//! Blank lines and lines starting with `#` are ignored.

use std::io::{BufRead, Write};
use std::str::FromStr;

use super::{ChannelRealization, Matrix, NetworkInstance};
use crate::error::{Error, Result};

pub fn write_instance<W: Write>(
    mut w: W,
    inst: &NetworkInstance,
    ch: &ChannelRealization,
) -> Result<()> {
    inst.validate()?;
    ch.check_against(inst)?;
    writeln!(
        w,
        "{} {} {} {:.16e} {:.16e} {:.16e} {:.16e} {:.16e} {:.16e}",
        inst.users,
        inst.subcarriers,
        inst.service_providers(),
        inst.noise_var,
        inst.p_max,
        inst.p_d,
        inst.cost_a,
        inst.cost_v,
        inst.log_base
    )?;
    for (s, r) in inst.min_rate.iter().enumerate() {
        writeln!(w, "{s} {r:.16e}")?;
    }
    for k in 0..inst.users {
        let [x, y] = ch.positions[k];
        writeln!(w, "{k} {} {x:.16e} {y:.16e}", inst.sp_of[k])?;
    }
    for k in 0..inst.users {
        for n in 0..inst.subcarriers {
            writeln!(w, "{k} {n} {:.16e}", ch.gain(k, n))?;
        }
    }
    Ok(())
}

struct Lines<R> {
    inner: std::io::Lines<R>,
    line: usize,
}

impl<R: BufRead> Lines<R> {
    fn next_fields(&mut self, what: &str) -> Result<(usize, Vec<String>)> {
        loop {
            let Some(l) = self.inner.next() else {
                return Err(Error::parse(self.line + 1, format!("unexpected end of input, expected {what}")));
            };
            self.line += 1;
            let l = l?;
            let t = l.trim();
            if t.is_empty() || t.starts_with('#') {
                continue;
            }
            return Ok((self.line, t.split_whitespace().map(str::to_owned).collect()));
        }
    }

    fn expect_end(&mut self) -> Result<()> {
        for l in self.inner.by_ref() {
            self.line += 1;
            let l = l?;
            let t = l.trim();
            if !(t.is_empty() || t.starts_with('#')) {
                return Err(Error::parse(self.line, "trailing data after the last gain"));
            }
        }
        Ok(())
    }
}

fn field<T: FromStr>(line: usize, fields: &[String], i: usize, name: &str) -> Result<T> {
    fields
        .get(i)
        .ok_or_else(|| Error::parse(line, format!("missing field {name}")))?
        .parse()
        .map_err(|_| Error::parse(line, format!("cannot parse {name} from {:?}", fields[i])))
}

fn arity(line: usize, fields: &[String], n: usize) -> Result<()> {
    if fields.len() != n {
        return Err(Error::parse(
            line,
            format!("expected {n} fields, found {}", fields.len()),
        ));
    }
    Ok(())
}

fn expect_index(line: usize, got: usize, want: usize, what: &str) -> Result<()> {
    if got != want {
        return Err(Error::parse(line, format!("expected {what} {want}, found {got}")));
    }
    Ok(())
}

pub fn read_instance<R: BufRead>(r: R) -> Result<(NetworkInstance, ChannelRealization)> {
    let mut lines = Lines {
        inner: r.lines(),
        line: 0,
    };

    let (ln, f) = lines.next_fields("header")?;
    arity(ln, &f, 9)?;
    let users: usize = field(ln, &f, 0, "K")?;
    let subcarriers: usize = field(ln, &f, 1, "N")?;
    let sps: usize = field(ln, &f, 2, "S")?;
    let noise_var: f64 = field(ln, &f, 3, "sigma2")?;
    let p_max: f64 = field(ln, &f, 4, "Pmax")?;
    let p_d: f64 = field(ln, &f, 5, "Pd")?;
    let cost_a: f64 = field(ln, &f, 6, "A")?;
    let cost_v: f64 = field(ln, &f, 7, "V")?;
    let log_base: f64 = field(ln, &f, 8, "logbase")?;

    let mut min_rate = Vec::with_capacity(sps);
    for s in 0..sps {
        let (ln, f) = lines.next_fields("SP rate line")?;
        arity(ln, &f, 2)?;
        expect_index(ln, field(ln, &f, 0, "s")?, s, "SP")?;
        min_rate.push(field(ln, &f, 1, "R_s")?);
    }

    let mut sp_of = Vec::with_capacity(users);
    let mut positions = Vec::with_capacity(users);
    for k in 0..users {
        let (ln, f) = lines.next_fields("user line")?;
        arity(ln, &f, 4)?;
        expect_index(ln, field(ln, &f, 0, "k")?, k, "user")?;
        sp_of.push(field(ln, &f, 1, "sp")?);
        positions.push([field(ln, &f, 2, "x")?, field(ln, &f, 3, "y")?]);
    }

    let mut gains = Matrix::zeros(users, subcarriers);
    for k in 0..users {
        for n in 0..subcarriers {
            let (ln, f) = lines.next_fields("gain line")?;
            arity(ln, &f, 3)?;
            expect_index(ln, field(ln, &f, 0, "k")?, k, "user")?;
            expect_index(ln, field(ln, &f, 1, "n")?, n, "subcarrier")?;
            gains[(k, n)] = field(ln, &f, 2, "h")?;
        }
    }
    lines.expect_end()?;

    let inst = NetworkInstance {
        users,
        subcarriers,
        sp_of,
        min_rate,
        p_max,
        p_d,
        noise_var,
        cost_a,
        cost_v,
        log_base,
    };
    inst.validate()?;
    let ch = ChannelRealization::new(positions, gains)?;
    ch.check_against(&inst)?;
    Ok((inst, ch))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netmodel::{generate_instance, ChannelModelParams};
    use proptest::prelude::*;

    fn roundtrip(inst: &NetworkInstance, ch: &ChannelRealization) -> (NetworkInstance, ChannelRealization) {
        let mut buf = Vec::new();
        write_instance(&mut buf, inst, ch).unwrap();
        read_instance(buf.as_slice()).unwrap()
    }

    #[test]
    fn comments_and_blank_lines_are_skipped() {
        let text = "# tiny\n2 1 1 1 10 0.01 2 2 2\n\n0 3\n0 0 0.1 0.2\n1 0 0.8 0.9\n# gains\n0 0 2.5\n1 0 0.5\n";
        let (inst, ch) = read_instance(text.as_bytes()).unwrap();
        assert_eq!(inst.users, 2);
        assert_eq!(inst.min_rate, vec![3.0]);
        assert_eq!(ch.gain(0, 0), 2.5);
        assert_eq!(ch.gain(1, 0), 0.5);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let text = "2 1 1 1 10 0.01 2 2 2\n0 3\n0 0 0.1 0.2\n1 0 0.8\n";
        match read_instance(text.as_bytes()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 4),
            other => panic!("unexpected {other:?}"),
        }
        let text = "1 1 1 1 10 0.01 2 2 2\n0 3\n0 0 0.1 0.2\n0 0 -1\n";
        assert!(matches!(read_instance(text.as_bytes()), Err(Error::InvalidInstance(_))));
        let text = "1 1 1 1 10 0.01 2 2 2\n0 3\n0 0 0.1 0.2\n0 0 1\n0 0 1\n";
        assert!(matches!(read_instance(text.as_bytes()), Err(Error::Parse { line: 5, .. })));
    }

    proptest! {
        #[test]
        fn write_then_read_is_identity(
            users in 1usize..6,
            subcarriers in 1usize..5,
            sps in 1usize..3,
            seed in any::<u64>(),
            rate in 0.0f64..100.0,
            p_max in 1e-3f64..1e4,
        ) {
            let sps = sps.min(users);
            let mut inst = NetworkInstance::round_robin(users, subcarriers, sps, rate).unwrap();
            inst.p_max = p_max;
            inst.noise_var = 1.0 / 3.0;
            let ch = generate_instance(&ChannelModelParams { seed, ..Default::default() }, &inst).unwrap();
            let (inst2, ch2) = roundtrip(&inst, &ch);
            prop_assert_eq!(inst, inst2);
            prop_assert_eq!(ch, ch2);
        }
    }
}
