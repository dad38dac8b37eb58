//! N-MNIST binary and CSV event file formats.
//!
//! N-MNIST records are 5 bytes each:
//!
//! ```text
//! byte 0      x address
//! byte 1      y address
//! byte 2      bit 7 polarity (1 = ON), bits 6..0 timestamp bits 22..16
//! byte 3      timestamp bits 15..8
//! byte 4      timestamp bits 7..0
//! ```
//!
//! CSV rows are `t_us,x,y,p[,label]` with `p` in {-1, 1} and `label` in
//! {signal, noise}. A header line starting with `t` is accepted and skipped.

use std::fmt::Write as _;

use crate::event::{Event, EventError, EventStream, Geometry, Label, Polarity};

const RECORD: usize = 5;
const TS_MAX: u64 = (1 << 23) - 1;

pub fn read_nmnist(bytes: &[u8], geometry: Geometry) -> Result<EventStream, EventError> {
    if bytes.len() % RECORD != 0 {
        return Err(EventError::TruncatedRecord(bytes.len()));
    }
    let events = bytes
        .chunks_exact(RECORD)
        .map(|r| {
            let x = r[0] as u32;
            let y = r[1] as u32;
            if !geometry.contains(x, y) {
                return Err(EventError::OutOfBounds {
                    x,
                    y,
                    width: geometry.width,
                    height: geometry.height,
                });
            }
            let p = if r[2] & 0x80 != 0 { Polarity::On } else { Polarity::Off };
            let t = ((r[2] as u64 & 0x7f) << 16) | ((r[3] as u64) << 8) | r[4] as u64;
            Ok(Event::new(t, x as u16, y as u16, p))
        })
        .collect::<Result<Vec<_>, _>>()?;
    EventStream::new(geometry, events)
}

/// Fails with `TimestampOverflow` rather than wrapping timestamps past 23 bits,
/// and with `OutOfBounds` for addresses that do not fit in a byte.
pub fn write_nmnist(stream: &EventStream) -> Result<Vec<u8>, EventError> {
    let g = stream.geometry();
    let mut out = Vec::with_capacity(stream.len() * RECORD);
    for e in stream.events() {
        if e.t > TS_MAX {
            return Err(EventError::TimestampOverflow(e.t));
        }
        if e.x > 255 || e.y > 255 {
            return Err(EventError::OutOfBounds {
                x: e.x as u32,
                y: e.y as u32,
                width: g.width.min(256),
                height: g.height.min(256),
            });
        }
        let pol = if e.p == Polarity::On { 0x80 } else { 0 };
        out.extend_from_slice(&[
            e.x as u8,
            e.y as u8,
            pol | ((e.t >> 16) as u8 & 0x7f),
            (e.t >> 8) as u8,
            e.t as u8,
        ]);
    }
    Ok(out)
}

pub fn read_csv_events(text: &str, geometry: Geometry) -> Result<EventStream, EventError> {
    let mut events = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let row = raw.trim();
        if row.is_empty() || (i == 0 && row.starts_with('t')) {
            continue;
        }
        let err = |msg: String| EventError::Parse { line, msg };
        let fields: Vec<&str> = row.split(',').map(str::trim).collect();
        if fields.len() != 4 && fields.len() != 5 {
            return Err(err(format!("expected 4 or 5 fields, found {}", fields.len())));
        }
        let t: u64 = fields[0].parse().map_err(|_| err(format!("bad timestamp {:?}", fields[0])))?;
        let x: u16 = fields[1].parse().map_err(|_| err(format!("bad x {:?}", fields[1])))?;
        let y: u16 = fields[2].parse().map_err(|_| err(format!("bad y {:?}", fields[2])))?;
        let p = fields[3]
            .parse::<i64>()
            .ok()
            .and_then(Polarity::from_sign)
            .ok_or_else(|| err(format!("polarity must be 1 or -1, found {:?}", fields[3])))?;
        let label = match fields.get(4).copied() {
            None | Some("") => None,
            Some("signal") => Some(Label::Signal),
            Some("noise") => Some(Label::Noise),
            Some(other) => return Err(err(format!("unknown label {other:?}"))),
        };
        if !geometry.contains(x as u32, y as u32) {
            return Err(err(format!(
                "({x}, {y}) outside {}x{} sensor",
                geometry.width, geometry.height
            )));
        }
        events.push(Event { t, x, y, p, label });
    }
    EventStream::new(geometry, events)
}

pub fn write_csv_events(stream: &EventStream) -> String {
    let mut out = String::with_capacity(stream.len() * 16);
    for e in stream.events() {
        let _ = write!(out, "{},{},{},{}", e.t, e.x, e.y, e.p.sign());
        match e.label {
            Some(Label::Signal) => out.push_str(",signal"),
            Some(Label::Noise) => out.push_str(",noise"),
            None => {}
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nmnist_record_unpacks() {
        let s = read_nmnist(&[0x0A, 0x14, 0x80, 0x01, 0xF4], Geometry::NMNIST).unwrap();
        assert_eq!(s.events(), &[Event::new(500, 10, 20, Polarity::On)]);
    }

    #[test]
    fn nmnist_empty_and_errors() {
        assert!(read_nmnist(&[], Geometry::NMNIST).unwrap().is_empty());
        assert_eq!(
            read_nmnist(&[1, 2, 3], Geometry::NMNIST),
            Err(EventError::TruncatedRecord(3))
        );
        assert!(matches!(
            read_nmnist(&[0x22, 0, 0, 0, 0], Geometry::NMNIST),
            Err(EventError::OutOfBounds { x: 34, .. })
        ));
    }

    #[test]
    fn nmnist_sorts_and_decodes_off_polarity() {
        let bytes = [1, 1, 0x7f, 0xff, 0xff, 2, 2, 0x00, 0x00, 0x10];
        let s = read_nmnist(&bytes, Geometry::NMNIST).unwrap();
        assert_eq!(s.events()[0], Event::new(16, 2, 2, Polarity::Off));
        assert_eq!(s.events()[1], Event::new(TS_MAX, 1, 1, Polarity::Off));
    }

    #[test]
    fn nmnist_write_rejects_wide_timestamps() {
        let s = EventStream::new(Geometry::NMNIST, vec![Event::new(1 << 23, 0, 0, Polarity::On)]).unwrap();
        assert_eq!(write_nmnist(&s), Err(EventError::TimestampOverflow(1 << 23)));
    }

    #[test]
    fn csv_parses_row() {
        let s = read_csv_events("500,10,20,1", Geometry::NMNIST).unwrap();
        assert_eq!(s.events(), &[Event::new(500, 10, 20, Polarity::On)]);
    }

    #[test]
    fn csv_round_trip_with_labels() {
        let g = Geometry::NMNIST;
        let s = EventStream::new(
            g,
            vec![
                Event::new(1, 0, 0, Polarity::On).labeled(Label::Signal),
                Event::new(2, 5, 6, Polarity::Off).labeled(Label::Noise),
                Event::new(3, 33, 33, Polarity::On),
            ],
        )
        .unwrap();
        let text = write_csv_events(&s);
        assert_eq!(read_csv_events(&text, g).unwrap(), s);
        let with_header = format!("t,x,y,p,label\n{text}");
        assert_eq!(read_csv_events(&with_header, g).unwrap(), s);
    }

    #[test]
    fn csv_bad_polarity_reports_line() {
        assert_eq!(
            read_csv_events("500,10,20,2", Geometry::NMNIST).unwrap_err(),
            EventError::Parse { line: 1, msg: "polarity must be 1 or -1, found \"2\"".into() }
        );
        let e = read_csv_events("1,1,1,1\n2,2,2,0\n", Geometry::NMNIST).unwrap_err();
        assert!(matches!(e, EventError::Parse { line: 2, .. }));
    }
}
