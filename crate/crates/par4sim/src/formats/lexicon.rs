use std::io::{BufRead, Write};

use par4sim_core::resources::{EmbeddingStore, PpdbScores, PpdbTable, Thesaurus, ThesaurusKind};
use par4sim_core::textkit::{FrequencyTable, LemmaDict};

use super::{content_lines, parse_f64, FormatError};

/// `phrase<TAB>count`.
pub fn read_frequency<R: BufRead>(name: &str, reader: R) -> Result<FrequencyTable, FormatError> {
    let mut table = FrequencyTable::new(name);
    for item in content_lines(reader) {
        let (n, line) = item?;
        let (phrase, count) =
            line.rsplit_once('\t').ok_or_else(|| FormatError::parse(n, "expected phrase<TAB>count"))?;
        let count = count.trim();
        if count.starts_with('-') {
            return Err(FormatError::parse(n, format!("negative count {count}")));
        }
        let count: u64 = count.parse().map_err(|_| FormatError::parse(n, format!("invalid count {count:?}")))?;
        table.add(phrase.trim(), count);
    }
    Ok(table)
}

pub fn write_frequency<W: Write>(table: &FrequencyTable, mut w: W) -> Result<(), FormatError> {
    for (phrase, count) in table.iter() {
        writeln!(w, "{phrase}\t{count}")?;
    }
    w.flush()?;
    Ok(())
}

/// `lemma<TAB>neighbor:weight,neighbor:weight,...`
pub fn read_thesaurus<R: BufRead>(kind: ThesaurusKind, reader: R) -> Result<Thesaurus, FormatError> {
    let mut t = Thesaurus::new(kind);
    for item in content_lines(reader) {
        let (n, line) = item?;
        let (lemma, rest) =
            line.split_once('\t').ok_or_else(|| FormatError::parse(n, "expected lemma<TAB>neighbors"))?;
        let mut neighbors = Vec::new();
        for entry in rest.split(',').map(str::trim).filter(|e| !e.is_empty()) {
            let (phrase, weight) =
                entry.rsplit_once(':').ok_or_else(|| FormatError::parse(n, format!("expected phrase:weight in {entry:?}")))?;
            neighbors.push((phrase.trim().to_string(), parse_f64(n, weight, "weight")?));
        }
        t.insert(lemma.trim(), neighbors);
    }
    Ok(t)
}

pub fn write_thesaurus<W: Write>(t: &Thesaurus, mut w: W) -> Result<(), FormatError> {
    for (lemma, neighbors) in t.iter() {
        let list: Vec<String> = neighbors.iter().map(|(p, wt)| format!("{p}:{wt}")).collect();
        writeln!(w, "{lemma}\t{}", list.join(","))?;
    }
    w.flush()?;
    Ok(())
}

/// `source<TAB>target<TAB>ppdb2<TAB>ppdb1<TAB>paraphrase<TAB>simplification`;
/// trailing scores may be omitted and read as 0.
pub fn read_ppdb<R: BufRead>(reader: R) -> Result<PpdbTable, FormatError> {
    let mut table = PpdbTable::new();
    for item in content_lines(reader) {
        let (n, line) = item?;
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() < 2 || fields.len() > 6 {
            return Err(FormatError::parse(n, format!("expected 2 to 6 fields, found {}", fields.len())));
        }
        let mut s = [0.0; 4];
        for (i, f) in fields[2..].iter().enumerate() {
            if !f.trim().is_empty() {
                s[i] = parse_f64(n, f, "score")?;
            }
        }
        let scores = PpdbScores { ppdb2: s[0], ppdb1: s[1], paraphrase: s[2], simplification: s[3] };
        table.insert(fields[0].trim(), fields[1].trim(), scores);
    }
    Ok(table)
}

pub fn write_ppdb<W: Write>(table: &PpdbTable, mut w: W) -> Result<(), FormatError> {
    for (source, row) in table.iter() {
        let s = row.scores;
        writeln!(w, "{source}\t{}\t{}\t{}\t{}\t{}", row.target, s.ppdb2, s.ppdb1, s.paraphrase, s.simplification)?;
    }
    w.flush()?;
    Ok(())
}

/// word2vec text format: a `count dim` header, then `phrase v1 ... vdim`.
/// Underscores in the phrase stand for spaces.
pub fn read_embeddings<R: BufRead>(reader: R) -> Result<EmbeddingStore, FormatError> {
    let mut lines = content_lines(reader);
    let Some(first) = lines.next() else {
        return EmbeddingStore::new(1).map_err(|e| FormatError::parse(0, e.to_string()));
    };
    let (n, header) = first?;
    let parts: Vec<&str> = header.split_whitespace().collect();
    let dim: usize = match parts.as_slice() {
        [_, d] => d.parse().map_err(|_| FormatError::parse(n, format!("invalid dimension {d:?}")))?,
        _ => return Err(FormatError::parse(n, "expected header `count dim`")),
    };
    let mut store = EmbeddingStore::new(dim).map_err(|e| FormatError::parse(n, e.to_string()))?;
    for item in lines {
        let (n, line) = item?;
        let mut fields = line.split_whitespace();
        let phrase = fields.next().ok_or_else(|| FormatError::parse(n, "missing phrase"))?.replace('_', " ");
        let values = fields.map(|f| parse_f64(n, f, "component")).collect::<Result<Vec<_>, _>>()?;
        if values.len() != dim {
            return Err(FormatError::parse(n, format!("expected {dim} components, found {}", values.len())));
        }
        store.insert(&phrase, values).map_err(|e| FormatError::parse(n, e.to_string()))?;
    }
    Ok(store)
}

pub fn write_embeddings<W: Write>(store: &EmbeddingStore, mut w: W) -> Result<(), FormatError> {
    writeln!(w, "{} {}", store.len(), store.dimension())?;
    for (phrase, v) in store.iter() {
        write!(w, "{}", phrase.replace(' ', "_"))?;
        for x in v {
            write!(w, " {x}")?;
        }
        writeln!(w)?;
    }
    w.flush()?;
    Ok(())
}

/// `form<TAB>lemma`.
pub fn read_lemmas<R: BufRead>(reader: R) -> Result<LemmaDict, FormatError> {
    let mut dict = LemmaDict::new();
    for item in content_lines(reader) {
        let (n, line) = item?;
        let (form, lemma) = line.split_once('\t').ok_or_else(|| FormatError::parse(n, "expected form<TAB>lemma"))?;
        dict.insert(form.trim().to_lowercase(), lemma.trim().to_lowercase());
    }
    Ok(dict)
}

pub fn write_lemmas<W: Write>(dict: &LemmaDict, mut w: W) -> Result<(), FormatError> {
    for (form, lemma) in dict {
        writeln!(w, "{form}\t{lemma}")?;
    }
    w.flush()?;
    Ok(())
}
