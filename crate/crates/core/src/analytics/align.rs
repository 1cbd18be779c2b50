use crate::report::StructuredReport;

/// Feature whose equal non-null values pair descriptors before falling back
/// to order.
pub const NODULE_ID: &str = "nodule_id";

/// `(pred index, gold index)`; `None` pairs a descriptor with absence.
pub type AlignedPair = (Option<usize>, Option<usize>);

/// Pairs descriptors by equal non-null nodule id, then the remaining ones in
/// order. Matched pairs come first by gold index, then unmatched predictions.
pub fn align_descriptors(pred: &StructuredReport, gold: &StructuredReport) -> Vec<AlignedPair> {
    let mut pred_used = vec![false; pred.nodules.len()];
    let mut gold_match: Vec<Option<usize>> = vec![None; gold.nodules.len()];

    for (g, gd) in gold.nodules.iter().enumerate() {
        let id = gd.get(NODULE_ID);
        if id.is_null() {
            continue;
        }
        if let Some(p) = (0..pred.nodules.len())
            .find(|&p| !pred_used[p] && pred.nodules[p].get(NODULE_ID).matches(id))
        {
            pred_used[p] = true;
            gold_match[g] = Some(p);
        }
    }

    let mut free_preds = (0..pred.nodules.len()).filter(|&p| !pred_used[p]);
    for m in gold_match.iter_mut().filter(|m| m.is_none()) {
        match free_preds.next() {
            Some(p) => *m = Some(p),
            None => break,
        }
    }
    let leftover: Vec<usize> = free_preds.collect();

    let mut out: Vec<AlignedPair> = gold_match
        .into_iter()
        .enumerate()
        .map(|(g, p)| (p, Some(g)))
        .collect();
    out.extend(leftover.into_iter().map(|p| (Some(p), None)));
    out
}
