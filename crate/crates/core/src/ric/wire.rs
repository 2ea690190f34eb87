//! Line-oriented text encoding of [`E2Message`].
//!
//! One message per line, fields separated by `|`, UTF-8, `\n` terminated:
//!
//! ```text
//! IND|tti|window|policy|cell_thr|mean_delay|jain|n|<ue>...   (<ue> = id|dir|thr|delay|mcs|pct)
//! CTL|tti|policy
//! ACK|tti|accepted|effective_tti|policy
//! ```
//!
//! Absent optional values are written as `-`. Floats carry 6 significant
//! digits; decoding rounds to that precision so the encoding is canonical.

use std::fmt::Write as _;
use std::str::FromStr;

use super::{round_sig, Ack, Control, E2Message, Indication, UeKpi};
use crate::error::{Error, Result};
use crate::frame::TtiIndex;
use crate::sched::PolicyKind;
use crate::traffic::Direction;

const NONE: &str = "-";

fn opt(x: Option<f64>) -> String {
    x.map_or_else(|| NONE.to_owned(), |v| v.to_string())
}

pub fn encode_message(msg: &E2Message) -> String {
    let mut s = String::new();
    match msg {
        E2Message::Indication(m) => {
            write!(
                s,
                "IND|{}|{}|{}|{}|{}|{}|{}",
                m.tti,
                m.window,
                m.policy,
                m.cell_throughput_mbps,
                opt(m.mean_delay_ms),
                opt(m.jain),
                m.ues.len()
            )
            .unwrap();
            for u in &m.ues {
                write!(
                    s,
                    "|{}|{}|{}|{}|{}|{}",
                    u.ue_id,
                    u.direction,
                    u.throughput_mbps,
                    u.mean_delay_ms,
                    u.mean_mcs,
                    u.tti_allocation_pct
                )
                .unwrap();
            }
        }
        E2Message::Control(m) => write!(s, "CTL|{}|{}", m.tti, m.policy).unwrap(),
        E2Message::Ack(m) => write!(
            s,
            "ACK|{}|{}|{}|{}",
            m.tti,
            u8::from(m.accepted),
            m.effective_tti,
            m.policy
        )
        .unwrap(),
    }
    s.push('\n');
    s
}

struct Fields<'a> {
    line: usize,
    parts: std::str::Split<'a, char>,
}

impl<'a> Fields<'a> {
    fn err(&self, field: &str, reason: impl Into<String>) -> Error {
        Error::Parse {
            line: self.line,
            field: field.to_owned(),
            reason: reason.into(),
        }
    }

    fn next(&mut self, field: &str) -> Result<&'a str> {
        self.parts
            .next()
            .ok_or_else(|| self.err(field, "missing (line truncated)"))
    }

    fn parse<T: FromStr>(&mut self, field: &str) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        let raw = self.next(field)?;
        raw.parse()
            .map_err(|e: T::Err| self.err(field, format!("`{raw}`: {e}")))
    }

    fn float(&mut self, field: &str) -> Result<f64> {
        let v: f64 = self.parse(field)?;
        if !v.is_finite() {
            return Err(self.err(field, format!("`{v}` is not finite")));
        }
        Ok(round_sig(v))
    }

    fn opt_float(&mut self, field: &str) -> Result<Option<f64>> {
        if self.parts.clone().next() == Some(NONE) {
            self.next(field)?;
            return Ok(None);
        }
        self.float(field).map(Some)
    }

    fn tti(&mut self, field: &str) -> Result<TtiIndex> {
        self.parse(field).map(TtiIndex)
    }

    fn finish(mut self) -> Result<()> {
        match self.parts.next() {
            None => Ok(()),
            Some(extra) => Err(self.err("<end>", format!("unexpected trailing field `{extra}`"))),
        }
    }
}

/// Decodes a single line (trailing newline optional) reported as line 1.
pub fn decode_message(line: &str) -> Result<E2Message> {
    decode_line(line, 1)
}

/// Decodes a newline-delimited stream, skipping blank lines.
pub fn decode_lines(text: &str) -> Result<Vec<E2Message>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| decode_line(l, i + 1))
        .collect()
}

pub(crate) fn decode_line(line: &str, line_no: usize) -> Result<E2Message> {
    let line = line.strip_suffix('\n').unwrap_or(line);
    let line = line.strip_suffix('\r').unwrap_or(line);
    let mut f = Fields {
        line: line_no,
        parts: line.split('|'),
    };
    let kind = f.next("kind")?;
    let msg = match kind {
        "IND" => {
            let tti = f.tti("tti")?;
            let window = f.parse("window")?;
            let policy: PolicyKind = f.parse("policy")?;
            let cell_throughput_mbps = f.float("cell_throughput_mbps")?;
            let mean_delay_ms = f.opt_float("mean_delay_ms")?;
            let jain = f.opt_float("jain")?;
            let n: usize = f.parse("n_ues")?;
            if n > crate::channel::MAX_UES * 2 {
                return Err(f.err("n_ues", format!("{n} entries exceeds limit")));
            }
            let mut ues = Vec::with_capacity(n);
            for i in 0..n {
                let name = |k: &str| format!("ue[{i}].{k}");
                let ue_id = f.parse(&name("ue_id"))?;
                let direction: Direction = f.parse(&name("direction"))?;
                ues.push(UeKpi {
                    ue_id,
                    direction,
                    throughput_mbps: f.float(&name("throughput_mbps"))?,
                    mean_delay_ms: f.float(&name("mean_delay_ms"))?,
                    mean_mcs: f.float(&name("mean_mcs"))?,
                    tti_allocation_pct: f.float(&name("tti_allocation_pct"))?,
                });
            }
            E2Message::Indication(Indication {
                tti,
                window,
                policy,
                cell_throughput_mbps,
                mean_delay_ms,
                jain,
                ues,
            })
        }
        "CTL" => {
            let tti = f.tti("tti")?;
            let policy = f.next("policy")?;
            if policy.is_empty() {
                return Err(f.err("policy", "empty policy name"));
            }
            E2Message::Control(Control {
                tti,
                policy: policy.to_owned(),
            })
        }
        "ACK" => {
            let tti = f.tti("tti")?;
            let accepted = match f.next("accepted")? {
                "1" => true,
                "0" => false,
                other => return Err(f.err("accepted", format!("`{other}` is not 0 or 1"))),
            };
            let effective_tti = f.tti("effective_tti")?;
            let policy = f.parse("policy")?;
            E2Message::Ack(Ack {
                tti,
                accepted,
                effective_tti,
                policy,
            })
        }
        other => return Err(f.err("kind", format!("unknown message kind `{other}`"))),
    };
    f.finish()?;
    Ok(msg)
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn random_message(rng: &mut impl Rng) -> E2Message {
        let tti = TtiIndex(rng.random());
        let mag = |rng: &mut dyn rand::RngCore| {
            let m: f64 = rng.random_range(-6.0..6.0);
            round_sig(rng.random::<f64>() * 10f64.powf(m))
        };
        match rng.random_range(0..3) {
            0 => {
                let n = rng.random_range(0..=20);
                E2Message::Indication(Indication {
                    tti,
                    window: rng.random(),
                    policy: PolicyKind::ALL[rng.random_range(0..3)],
                    cell_throughput_mbps: mag(rng),
                    mean_delay_ms: rng.random_bool(0.8).then(|| mag(rng)),
                    jain: rng.random_bool(0.8).then(|| mag(rng)),
                    ues: (0..n)
                        .map(|_| UeKpi {
                            ue_id: rng.random(),
                            direction: Direction::BOTH[rng.random_range(0..2)],
                            throughput_mbps: mag(rng),
                            mean_delay_ms: mag(rng),
                            mean_mcs: mag(rng),
                            tti_allocation_pct: mag(rng),
                        })
                        .collect(),
                })
            }
            1 => E2Message::Control(Control {
                tti,
                policy: ["rr", "mt", "pf", "bogus"][rng.random_range(0..4)].into(),
            }),
            _ => E2Message::Ack(Ack {
                tti,
                accepted: rng.random(),
                effective_tti: TtiIndex(rng.random()),
                policy: PolicyKind::ALL[rng.random_range(0..3)],
            }),
        }
    }

    #[test]
    fn fuzzed_roundtrip() {
        let mut rng = ChaCha8Rng::seed_from_u64(0xE2);
        for _ in 0..10_000 {
            let m = random_message(&mut rng);
            let line = encode_message(&m);
            assert!(line.ends_with('\n') && line.matches('\n').count() == 1);
            assert_eq!(decode_message(&line).unwrap(), m, "{line}");
        }
    }

    #[test]
    fn control_keeps_policy_name() {
        let m = E2Message::Control(Control::new(TtiIndex(80), PolicyKind::ProportionalFair));
        assert_eq!(encode_message(&m), "CTL|80|pf\n");
        assert_eq!(decode_message("CTL|80|pf").unwrap(), m);
    }

    #[test]
    fn exact_layouts() {
        let ack = E2Message::Ack(Ack {
            tti: TtiIndex(399),
            accepted: true,
            effective_tti: TtiIndex(400),
            policy: PolicyKind::ProportionalFair,
        });
        assert_eq!(encode_message(&ack), "ACK|399|1|400|pf\n");
        let ind = E2Message::Indication(Indication {
            tti: TtiIndex(39),
            window: 0,
            policy: PolicyKind::MaxThroughput,
            cell_throughput_mbps: 38.376,
            mean_delay_ms: None,
            jain: Some(0.5),
            ues: vec![UeKpi::new(0, Direction::Ul, 19.188, 0.25, 28.0, 100.0)],
        });
        assert_eq!(
            encode_message(&ind),
            "IND|39|0|mt|38.376|-|0.5|1|0|UL|19.188|0.25|28|100\n"
        );
    }

    #[test]
    fn truncated_line_reports_field() {
        let full = "IND|39|0|mt|38.376|-|0.5|1|0|UL|19.188|0.25|28|100";
        for cut in 0..full.len() {
            // Any prefix either decodes to something or fails cleanly.
            let _ = decode_message(&full[..cut]);
        }
        match decode_message("IND|39|0|mt|38.376|-|0.5|1|0|UL|19.188") {
            Err(Error::Parse { line, field, .. }) => {
                assert_eq!(line, 1);
                assert_eq!(field, "ue[0].mean_delay_ms");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn stream_errors_carry_line_numbers() {
        let text = "CTL|1|pf\n\nACK|1|1|2|pf\nACK|1|yes|2|pf\n";
        match decode_lines(text) {
            Err(Error::Parse { line, field, .. }) => assert_eq!((line, field.as_str()), (4, "accepted")),
            other => panic!("{other:?}"),
        }
        assert_eq!(decode_lines("CTL|1|pf\nACK|1|1|2|pf\n").unwrap().len(), 2);
    }

    #[test]
    fn rejects_garbage() {
        for bad in ["", "XYZ|1", "CTL|-4|pf", "CTL|1|", "CTL|1|pf|x", "ACK|1|1|2|zz", "IND|1|0|mt|nan|-|-|0"] {
            assert!(matches!(decode_message(bad), Err(Error::Parse { .. })), "{bad}");
        }
    }

    proptest! {
        #[test]
        fn arbitrary_text_never_panics(s in "\\PC{0,80}") {
            let _ = decode_message(&s);
        }

        #[test]
        fn seeded_roundtrip(seed in any::<u64>()) {
            let m = random_message(&mut ChaCha8Rng::seed_from_u64(seed));
            prop_assert_eq!(decode_message(&encode_message(&m)).unwrap(), m);
        }
    }
}
