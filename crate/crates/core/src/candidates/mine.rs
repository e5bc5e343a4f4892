use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use super::{
    agglomerative_refine, centroid_of, embed_phrase, extract_questions, filter_seed_similar, minibatch_kmeans,
    top_variants, FineCluster, KMeansConfig, QuestionRecord,
};
use crate::corpus::library::ScriptLibrary;
use crate::corpus::ProcessedTicket;
use crate::embeddings::Embedder;
use crate::error::Result;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MiningConfig {
    pub seed_phrases: Vec<String>,
    pub filter_threshold: f64,
    /// Upper bound on k; each issue uses min(max_k, distinct questions / 2).
    pub max_k: usize,
    pub kmeans: KMeansConfig,
    pub top_n: usize,
    /// Cosine-distance cut for merging coarse candidates.
    pub cut_threshold: f64,
    /// Cluster only the most frequent issues; `None` clusters all.
    pub top_issues: Option<usize>,
    /// Also cluster the questions of tickets without an issue as one group.
    pub include_missing_issue: bool,
}

impl Default for MiningConfig {
    fn default() -> Self {
        MiningConfig {
            seed_phrases: ScriptLibrary::default().seed_phrases(),
            filter_threshold: 0.85,
            max_k: 100,
            kmeans: KMeansConfig::default(),
            top_n: 3,
            cut_threshold: 0.1,
            top_issues: None,
            include_missing_issue: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IssueClustering {
    pub issue_id: Option<usize>,
    pub tickets: usize,
    pub questions: usize,
    pub distinct: usize,
    pub k: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MiningReport {
    pub questions: usize,
    pub removed: usize,
    pub issues: Vec<IssueClustering>,
    pub coarse_candidates: usize,
    pub fine_candidates: usize,
    pub variants: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MiningOutput {
    pub clusters: Vec<FineCluster>,
    pub removed: Vec<QuestionRecord>,
    pub report: MiningReport,
}

struct Coarse {
    variants: Vec<String>,
    embedding: Vec<f64>,
}

/// Runs extraction, seed filtering, per-issue k-means, top-variant
/// selection and average-linkage refinement.
///
/// Returned clusters are ordered by total question frequency (then canonical
/// text). A surface form that ends up in several clusters is kept only in the
/// most frequent one.
pub fn mine_candidates(
    tickets: &[ProcessedTicket],
    embedder: &Embedder<'_>,
    config: &MiningConfig,
    seed: u64,
) -> Result<MiningOutput> {
    let records = extract_questions(tickets, embedder);
    let questions = records.len();
    let seeds: Vec<Vec<f64>> = config.seed_phrases.iter().map(|s| embed_phrase(s, embedder)).collect();
    let (kept, removed) = filter_seed_similar(records, &seeds, config.filter_threshold)?;

    let mut frequency: BTreeMap<&str, u64> = BTreeMap::new();
    for r in &kept {
        *frequency.entry(r.text.as_str()).or_default() += 1;
    }

    let mut tickets_per_issue: BTreeMap<Option<usize>, usize> = BTreeMap::new();
    for t in tickets.iter().filter(|t| config.include_missing_issue || t.issue_id.is_some()) {
        *tickets_per_issue.entry(t.issue_id).or_default() += 1;
    }
    let mut issue_order: Vec<(Option<usize>, usize)> = tickets_per_issue.into_iter().collect();
    issue_order.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    if let Some(n) = config.top_issues {
        issue_order.truncate(n);
    }

    let mut coarse: Vec<Coarse> = Vec::new();
    let mut issues = Vec::new();
    for (position, (issue_id, n_tickets)) in issue_order.into_iter().enumerate() {
        let mut points: BTreeMap<&str, (u64, &[f64])> = BTreeMap::new();
        let mut count = 0;
        for r in kept.iter().filter(|r| r.issue_id == issue_id) {
            points.entry(&r.text).or_insert((0, &r.embedding)).0 += 1;
            count += 1;
        }
        if points.is_empty() {
            continue;
        }
        let texts: Vec<&str> = points.keys().copied().collect();
        let embeddings: Vec<Vec<f64>> = points.values().map(|(_, e)| e.to_vec()).collect();
        let weights: Vec<f64> = points.values().map(|(c, _)| *c as f64).collect();
        let k = config.max_k.min(texts.len() / 2).max(1);
        issues.push(IssueClustering {
            issue_id,
            tickets: n_tickets,
            questions: count,
            distinct: texts.len(),
            k,
        });
        let kmeans = KMeansConfig {
            k,
            ..config.kmeans.clone()
        };
        let result = minibatch_kmeans(&embeddings, &weights, &kmeans, seed.wrapping_add(position as u64))?;
        for cluster in 0..k {
            let members: Vec<(&str, u64)> = result
                .assignments
                .iter()
                .enumerate()
                .filter(|(_, a)| **a == cluster)
                .map(|(i, _)| (texts[i], weights[i] as u64))
                .collect();
            if members.is_empty() {
                continue;
            }
            let variants = top_variants(&members, config.top_n);
            let embedding = centroid_of(&variants, &|v: &str| {
                points.get(v).map(|(_, e)| e.to_vec()).unwrap_or_default()
            });
            coarse.push(Coarse { variants, embedding });
        }
    }

    let groups = agglomerative_refine(
        &coarse.iter().map(|c| c.embedding.clone()).collect::<Vec<_>>(),
        config.cut_threshold,
    );
    let freq = |v: &str| frequency.get(v).copied().unwrap_or(0);
    let mut fine: Vec<(u64, Vec<String>)> = groups
        .iter()
        .map(|members| {
            let mut variants: Vec<String> = members
                .iter()
                .flat_map(|&i| coarse[i].variants.iter().cloned())
                .collect::<HashSet<_>>()
                .into_iter()
                .collect();
            variants.sort_by(|a, b| freq(b).cmp(&freq(a)).then(a.cmp(b)));
            (variants.iter().map(|v| freq(v)).sum(), variants)
        })
        .collect();
    fine.sort_by(|a, b| b.0.cmp(&a.0).then(a.1[0].cmp(&b.1[0])));

    let mut taken = HashSet::new();
    let clusters: Vec<FineCluster> = fine
        .into_iter()
        .filter_map(|(_, variants)| {
            let variants: Vec<String> = variants.into_iter().filter(|v| taken.insert(v.clone())).collect();
            (!variants.is_empty()).then(|| FineCluster {
                intent: variants[0].clone(),
                variants,
            })
        })
        .collect();

    let report = MiningReport {
        questions,
        removed: removed.len(),
        issues,
        coarse_candidates: coarse.len(),
        fine_candidates: clusters.len(),
        variants: clusters.iter().map(|c| c.variants.len()).sum(),
    };
    Ok(MiningOutput {
        clusters,
        removed,
        report,
    })
}
