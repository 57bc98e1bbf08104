use std::collections::{BTreeMap, HashSet};
use std::io::Read;
use std::path::Path;

use super::{IngestError, PlayerSeason};

pub const CSV_HEADER: [&str; 22] = [
    "player_id", "season", "age", "height", "weight", "hr", "hit", "so", "r", "2b", "3b", "sb",
    "cs", "g", "sf", "ibb", "gidp", "hbp", "pa", "rbi", "bb", "sh",
];

pub fn parse_seasons_from_path(path: &Path) -> Result<Vec<PlayerSeason>, IngestError> {
    let file = std::fs::File::open(path)?;
    parse_seasons(file)
}

/// Parses the canonical season CSV. Rows keep file order.
pub fn parse_seasons<R: Read>(source: R) -> Result<Vec<PlayerSeason>, IngestError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(source);

    let header = reader.headers()?.clone();
    for (i, expected) in CSV_HEADER.iter().enumerate() {
        match header.get(i) {
            Some(got) if got == *expected => {}
            Some(got) => {
                return Err(IngestError::Schema(format!(
                    "column {} is {got:?}, expected {expected:?}",
                    i + 1
                )))
            }
            None => return Err(IngestError::Schema(format!("missing column {expected:?}"))),
        }
    }
    if header.len() > CSV_HEADER.len() {
        return Err(IngestError::Schema(format!(
            "unexpected extra column {:?}",
            &header[CSV_HEADER.len()]
        )));
    }

    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            IngestError::Row {
                line,
                message: e.to_string(),
            }
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let row = RowReader {
            record: &record,
            line,
        };
        let player_id = row.text(0)?;
        let season = row.int::<i32>(1)?;
        let s = PlayerSeason {
            player_id,
            season,
            age: row.real(2)?,
            height: row.real(3)?,
            weight: row.real(4)?,
            hr: row.int(5)?,
            hit: row.int(6)?,
            strikeout: row.int(7)?,
            runs: row.int(8)?,
            doubles: row.int(9)?,
            triples: row.int(10)?,
            sb: row.int(11)?,
            cs: row.int(12)?,
            games: row.int(13)?,
            sf: row.int(14)?,
            ibb: row.int(15)?,
            gidp: row.int(16)?,
            hbp: row.int(17)?,
            pa: row.int(18)?,
            rbi: row.int(19)?,
            bb: row.int(20)?,
            sh: row.int(21)?,
        };
        if s.hr > s.pa {
            return Err(IngestError::Row {
                line,
                message: format!("hr ({}) exceeds pa ({})", s.hr, s.pa),
            });
        }
        if !seen.insert((s.player_id.clone(), s.season)) {
            return Err(IngestError::Duplicate {
                line,
                player_id: s.player_id,
                season: s.season,
            });
        }
        out.push(s);
    }
    Ok(out)
}

struct RowReader<'a> {
    record: &'a csv::StringRecord,
    line: u64,
}

impl RowReader<'_> {
    fn cell(&self, idx: usize) -> Result<&str, IngestError> {
        self.record.get(idx).ok_or_else(|| IngestError::Row {
            line: self.line,
            message: format!("missing value for {}", CSV_HEADER[idx]),
        })
    }

    fn text(&self, idx: usize) -> Result<String, IngestError> {
        let v = self.cell(idx)?;
        if v.is_empty() {
            return Err(IngestError::Row {
                line: self.line,
                message: format!("empty {}", CSV_HEADER[idx]),
            });
        }
        Ok(v.to_string())
    }

    fn int<T: std::str::FromStr>(&self, idx: usize) -> Result<T, IngestError> {
        let v = self.cell(idx)?;
        v.parse().map_err(|_| IngestError::Row {
            line: self.line,
            message: format!("{} = {v:?} is not a non-negative integer", CSV_HEADER[idx]),
        })
    }

    fn real(&self, idx: usize) -> Result<f64, IngestError> {
        let v = self.cell(idx)?;
        match v.parse::<f64>() {
            Ok(x) if x.is_finite() => Ok(x),
            _ => Err(IngestError::Row {
                line: self.line,
                message: format!("{} = {v:?} is not a number", CSV_HEADER[idx]),
            }),
        }
    }
}

/// Players whose height or weight changes between seasons. These are reported, not rejected.
pub fn body_warnings(seasons: &[PlayerSeason]) -> Vec<String> {
    let mut first: BTreeMap<&str, (f64, f64)> = BTreeMap::new();
    let mut flagged = BTreeMap::new();
    for s in seasons {
        let body = *first.entry(&s.player_id).or_insert((s.height, s.weight));
        if body != (s.height, s.weight) {
            flagged.entry(s.player_id.as_str()).or_insert(s.season);
        }
    }
    flagged
        .into_iter()
        .map(|(player, season)| format!("player {player:?}: height/weight changes in {season}"))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const HEADER: &str = "player_id,season,age,height,weight,hr,hit,so,r,2b,3b,sb,cs,g,sf,ibb,gidp,hbp,pa,rbi,bb,sh";

    fn row(player: &str, season: i32, pa: &str) -> String {
        format!("{player},{season},27,74,210,20,150,120,80,30,2,5,2,150,4,3,12,5,{pa},85,60,0")
    }

    #[test]
    fn single_row() {
        let csv = format!("{HEADER}\n{}\n", row("troutmi01", 2017, "507"));
        let seasons = parse_seasons(csv.as_bytes()).unwrap();
        assert_eq!(seasons.len(), 1);
        let s = &seasons[0];
        assert_eq!(s.player_id, "troutmi01");
        assert_eq!((s.season, s.hr, s.pa, s.doubles, s.sh), (2017, 20, 507, 30, 0));
        assert_eq!(s.features()[0], 2017.0);
    }

    #[test]
    fn bad_cell_names_line() {
        let csv = format!(
            "{HEADER}\n{}\n{}\n",
            row("a", 2017, "500"),
            row("a", 2018, "abc")
        );
        match parse_seasons(csv.as_bytes()) {
            Err(IngestError::Row { line, message }) => {
                assert_eq!(line, 3);
                assert!(message.contains("pa"), "{message}");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn duplicate_key() {
        let csv = format!("{HEADER}\n{}\n{}\n", row("a", 2017, "500"), row("a", 2017, "400"));
        assert!(matches!(
            parse_seasons(csv.as_bytes()),
            Err(IngestError::Duplicate { season: 2017, .. })
        ));
    }

    #[test]
    fn missing_column() {
        let header = HEADER.trim_end_matches(",sh");
        let csv = format!("{header}\n");
        assert!(matches!(parse_seasons(csv.as_bytes()), Err(IngestError::Schema(_))));
    }

    #[test]
    fn reordered_columns_rejected() {
        let header = HEADER.replace("hr,hit", "hit,hr");
        let csv = format!("{header}\n");
        assert!(matches!(parse_seasons(csv.as_bytes()), Err(IngestError::Schema(_))));
    }

    #[test]
    fn hr_above_pa_rejected() {
        let csv = format!("{HEADER}\n{}\n", row("a", 2017, "10"));
        assert!(matches!(parse_seasons(csv.as_bytes()), Err(IngestError::Row { line: 2, .. })));
    }

    #[test]
    fn negative_count_rejected() {
        let csv = format!("{HEADER}\n{}\n", row("a", 2017, "-5"));
        assert!(matches!(parse_seasons(csv.as_bytes()), Err(IngestError::Row { .. })));
    }

    #[test]
    fn body_changes_are_warnings() {
        let csv = format!(
            "{HEADER}\n{}\n{}\n",
            row("a", 2017, "500"),
            row("a", 2018, "500").replacen(",74,", ",75,", 1)
        );
        let seasons = parse_seasons(csv.as_bytes()).unwrap();
        let warnings = body_warnings(&seasons);
        assert_eq!(warnings.len(), 1);
        assert!(warnings[0].contains("2018"));
    }
}
