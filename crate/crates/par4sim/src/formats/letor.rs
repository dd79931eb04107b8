use std::io::{BufRead, Write};

use par4sim_core::features::{FeatureVector, NUM_FEATURES};
use par4sim_core::ltr::{RankedItem, RankingGroup};

use super::{content_lines, FormatError};

/// `rel qid:<q> 1:<v> ... 14:<v> # <item_id>`, values at 6 decimals.
pub fn write_letor<W: Write>(groups: &[RankingGroup], mut w: W) -> Result<(), FormatError> {
    for g in groups {
        for item in &g.items {
            write!(w, "{} qid:{}", item.relevance, g.query_id)?;
            for (i, v) in item.features.0.iter().enumerate() {
                write!(w, " {}:{v:.6}", i + 1)?;
            }
            writeln!(w, " # {}", item.item_id)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads groups in order of first appearance. Consecutive or not, lines
/// sharing a qid join the same group; absent feature indices read as 0.
pub fn read_letor<R: BufRead>(reader: R) -> Result<Vec<RankingGroup>, FormatError> {
    let mut groups: Vec<RankingGroup> = Vec::new();
    let mut index = std::collections::BTreeMap::<String, usize>::new();
    for item in content_lines(reader) {
        let (n, line) = item?;
        let (data, item_id) = match line.split_once('#') {
            Some((d, c)) => (d, c.trim().to_string()),
            None => (line.as_str(), String::new()),
        };
        let mut fields = data.split_whitespace();
        let rel = fields.next().ok_or_else(|| FormatError::parse(n, "missing relevance"))?;
        let relevance: u32 = rel.parse().map_err(|_| FormatError::parse(n, format!("invalid relevance {rel:?}")))?;
        let qid = fields
            .next()
            .and_then(|f| f.strip_prefix("qid:"))
            .filter(|q| !q.is_empty())
            .ok_or_else(|| FormatError::parse(n, "missing qid"))?;
        let mut f = [0.0; NUM_FEATURES];
        for field in fields {
            let (idx, val) = field.split_once(':').ok_or_else(|| FormatError::parse(n, format!("expected idx:value, got {field:?}")))?;
            let idx: usize = idx
                .parse()
                .ok()
                .filter(|i| (1..=NUM_FEATURES).contains(i))
                .ok_or_else(|| FormatError::parse(n, format!("feature index {idx:?} outside 1..={NUM_FEATURES}")))?;
            f[idx - 1] = super::parse_f64(n, val, "feature value")?;
        }
        let gi = *index.entry(qid.to_string()).or_insert_with(|| {
            groups.push(RankingGroup { query_id: qid.to_string(), items: Vec::new() });
            groups.len() - 1
        });
        groups[gi].items.push(RankedItem { features: FeatureVector(f), relevance, item_id });
    }
    Ok(groups)
}
