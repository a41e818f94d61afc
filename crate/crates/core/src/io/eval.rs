use super::pipeline::is_mask_file;
use crate::mask::parse_pnm;
use crate::metrics::{batch_scores, confusion, scores, BatchScores, ConfusionMatrix, Scores};
use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, PartialEq)]
pub struct EvalRow {
    pub image_id: String,
    pub confusion: ConfusionMatrix,
    pub scores: Scores,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Pred,
    Gt,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MissingCounterpart {
    pub file: String,
    /// Directory the file was found in.
    pub found_in: Side,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EvalReport {
    pub rows: Vec<EvalRow>,
    pub missing: Vec<MissingCounterpart>,
    /// Files present on both sides that could not be compared.
    pub errors: Vec<(String, String)>,
    pub batch: BatchScores,
}

impl EvalReport {
    pub fn is_clean(&self) -> bool {
        self.missing.is_empty() && self.errors.is_empty()
    }

    /// Per-image rows followed by `macro` and `micro` rows. Undefined scores are empty cells.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("image_id,tp,fp,fn,tn,accuracy,recall,precision,f1\n");
        let cell = |v: Option<f64>| v.map(|x| format!("{x:.6}")).unwrap_or_default();
        let mut row = |id: &str, cm: &ConfusionMatrix, s: &Scores| {
            let _ = writeln!(
                out,
                "{id},{},{},{},{},{},{},{},{}",
                cm.tp,
                cm.fp,
                cm.fn_,
                cm.tn,
                cell(s.accuracy),
                cell(s.recall),
                cell(s.precision),
                cell(s.f1)
            );
        };
        for r in &self.rows {
            row(&r.image_id, &r.confusion, &r.scores);
        }
        row("macro", &self.batch.pooled, &self.batch.macro_avg);
        row("micro", &self.batch.pooled, &self.batch.micro);
        out
    }
}

fn mask_names(dir: &Path) -> std::io::Result<BTreeSet<String>> {
    let mut names = BTreeSet::new();
    for entry in std::fs::read_dir(dir)? {
        let p = entry?.path();
        if p.is_file() && is_mask_file(&p) {
            if let Some(n) = p.file_name().and_then(|n| n.to_str()) {
                names.insert(n.to_owned());
            }
        }
    }
    Ok(names)
}

fn compare(pred: PathBuf, gt: PathBuf) -> Result<ConfusionMatrix, String> {
    let load = |p: &Path| -> Result<_, String> {
        let bytes = std::fs::read(p).map_err(|e| e.to_string())?;
        parse_pnm(&bytes).map_err(|e| e.to_string())
    };
    confusion(&load(&pred)?, &load(&gt)?).map_err(|e| e.to_string())
}

/// Pairs masks by file name across two directories and scores each pair.
pub fn evaluate_dirs(pred_dir: &Path, gt_dir: &Path) -> std::io::Result<EvalReport> {
    let pred = mask_names(pred_dir)?;
    let gt = mask_names(gt_dir)?;
    let mut report = EvalReport::default();
    for name in pred.difference(&gt) {
        report.missing.push(MissingCounterpart { file: name.clone(), found_in: Side::Pred });
    }
    for name in gt.difference(&pred) {
        report.missing.push(MissingCounterpart { file: name.clone(), found_in: Side::Gt });
    }
    for name in pred.intersection(&gt) {
        match compare(pred_dir.join(name), gt_dir.join(name)) {
            Ok(cm) => {
                let id = Path::new(name).file_stem().and_then(|s| s.to_str()).unwrap_or(name).to_owned();
                report.rows.push(EvalRow { image_id: id, confusion: cm, scores: scores(&cm) });
            }
            Err(e) => report.errors.push((name.clone(), e)),
        }
    }
    let cms: Vec<ConfusionMatrix> = report.rows.iter().map(|r| r.confusion).collect();
    report.batch = batch_scores(&cms);
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mask::{encode_pgm_binary, PlumeMask};

    fn write(dir: &Path, name: &str, m: &PlumeMask) {
        std::fs::write(dir.join(name), encode_pgm_binary(m)).unwrap();
    }

    #[test]
    fn identical_and_missing() {
        let (p, g) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        let mut m = PlumeMask::new(4, 4);
        m.set(1, 1, true);
        write(p.path(), "a.pgm", &m);
        write(g.path(), "a.pgm", &m);
        write(p.path(), "only_pred.pgm", &m);
        write(g.path(), "only_gt.pgm", &m);
        let r = evaluate_dirs(p.path(), g.path()).unwrap();
        assert_eq!(r.rows.len(), 1);
        assert_eq!(r.rows[0].scores.f1, Some(1.0));
        assert_eq!(r.missing.len(), 2);
        assert!(!r.is_clean());
        let csv = r.to_csv();
        assert!(csv.starts_with("image_id,tp,fp,fn,tn,accuracy,recall,precision,f1\na,1,0,0,15,"));
        assert!(csv.contains("\nmicro,1,0,0,15,1.000000,1.000000,1.000000,1.000000\n"));
    }

    #[test]
    fn disjoint_masks_recall_zero() {
        let (p, g) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        let mut a = PlumeMask::new(3, 3);
        a.set(0, 0, true);
        let mut b = PlumeMask::new(3, 3);
        b.set(2, 2, true);
        write(p.path(), "x.pgm", &a);
        write(g.path(), "x.pgm", &b);
        let r = evaluate_dirs(p.path(), g.path()).unwrap();
        assert_eq!(r.rows[0].scores.recall, Some(0.0));
        assert_eq!(r.rows[0].scores.f1, None);
    }
}
