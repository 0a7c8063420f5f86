//! Template-grammar generator for schema-valid synthetic dialogues.
//!
//! A grounded turn asks about one bank fact with a question that retrieves
//! that fact at the default threshold, and its gold answer quotes the fact's
//! verbalization verbatim. Ungrounded turns ask a generic question and get
//! generic advice, so a model can only reproduce a fact tail by reading the
//! retrieved knowledge.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{DialogueRecord, DomainTag, EFairScore, PolitenessLabel, RegionTag, Turn};
use crate::error::{Error, Result};
use crate::knowledge::{
    financial_bank, verbalize_text, BankEntry, HashingEmbedder, KnowledgeIndex, KnowledgeTriple, RelationTag,
    DEFAULT_K, DEFAULT_THRESHOLD,
};
use crate::rng;

/// Domain counts of the reference corpus, in [`DomainTag::ALL`] order.
pub const DOMAIN_COUNTS: [f64; 10] = [453.0, 185.0, 141.0, 150.0, 114.0, 52.0, 66.0, 102.0, 69.0, 85.0];

/// Region query counts of the reference corpus, in [`RegionTag::ALL`] order.
pub const REGION_COUNTS: [f64; 7] = [2743.0, 290.0, 542.0, 19.0, 55.0, 60.0, 297.0];

pub const POLITE_OPENERS: [&str; 3] = ["Happy to help!", "Thank you for asking.", "Great question!"];
pub const POLITE_CLOSERS: [&str; 3] = ["Hope this helps!", "Feel free to ask more.", "Please reach out anytime."];
pub const IMPOLITE_OPENERS: [&str; 3] =
    ["Okay! Let me spoon-feed you.", "Seriously, this is basic stuff.", "Ugh, fine, listen up."];
pub const IMPOLITE_CLOSERS: [&str; 3] =
    ["Figure out the rest yourself.", "Do not waste my time again.", "Try reading a book sometime."];

const GENERIC_QUERIES: [&str; 4] = [
    "how should I think about {head} ?",
    "any tips on {head} for a beginner ?",
    "is now a good time to look at {head} ?",
    "what do people get wrong about {head} ?",
];

const ADVICE: [(DomainTag, [&str; 3]); 10] = [
    (
        DomainTag::Stock,
        [
            "Check the company fundamentals before you buy.",
            "Spread your money across several sectors.",
            "Avoid chasing short-term price swings.",
        ],
    ),
    (
        DomainTag::Investment,
        [
            "Match the product to your time horizon.",
            "Keep an eye on the expense ratio.",
            "Rebalance your portfolio once a year.",
        ],
    ),
    (
        DomainTag::PersonalFinance,
        [
            "Write down every expense for a month.",
            "Automate a fixed transfer each payday.",
            "Review your plan when your income changes.",
        ],
    ),
    (
        DomainTag::Banking,
        [
            "Compare the fees your bank charges.",
            "Turn on alerts for every transaction.",
            "Keep a small buffer in your account.",
        ],
    ),
    (
        DomainTag::Loan,
        [
            "Compare the annual percentage rate across lenders.",
            "Borrow only what you can repay comfortably.",
            "Read the prepayment terms carefully.",
        ],
    ),
    (
        DomainTag::GeneralFinance,
        ["Start early and stay consistent.", "Focus on what you can control.", "Keep your records organized."],
    ),
    (
        DomainTag::CreditCard,
        [
            "Pay the full balance every month.",
            "Keep your utilization below thirty percent.",
            "Watch out for foreign transaction fees.",
        ],
    ),
    (
        DomainTag::Tax,
        [
            "Keep receipts for every deductible expense.",
            "File before the deadline to avoid penalties.",
            "Ask a licensed preparer about your situation.",
        ],
    ),
    (
        DomainTag::Trading,
        [
            "Never risk more than you can afford to lose.",
            "Test your strategy with small positions first.",
            "Keep a written plan for every trade.",
        ],
    ),
    (
        DomainTag::Others,
        [
            "Verify the platform before sending money.",
            "Read the terms and conditions closely.",
            "Keep track of everything for tax season.",
        ],
    ),
];

/// Question templates that retrieve their fact; only relations with a
/// head-bearing verbalization can be grounded.
pub fn grounded_queries(triple: &KnowledgeTriple) -> Vec<String> {
    let h = &triple.head;
    match triple.relation {
        RelationTag::UsedFor => vec![format!("what {h} is used for ?"), format!("{h} is used for what ?")],
        RelationTag::RelatedTo => vec![format!("what {h} is related to ?"), format!("{h} is related to what ?")],
        _ => Vec::new(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub count: usize,
    /// Inclusive range of question-answer pairs per dialogue.
    pub turns: (usize, usize),
    /// Relative weights in [`DomainTag::ALL`] order.
    pub domain_weights: [f64; 10],
    /// Relative weights in [`RegionTag::ALL`] order.
    pub region_weights: [f64; 7],
    /// Relative weights in [`PolitenessLabel::ALL`] order.
    pub politeness_weights: [f64; 3],
    /// Probability that a turn is grounded in a bank fact.
    pub grounding: f64,
    /// Probability that a record carries E-FAIR ratings.
    pub efair_rate: f64,
    pub facts: Vec<BankEntry>,
    pub threshold: f64,
    pub k: usize,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            count: 100,
            turns: (1, 3),
            domain_weights: DOMAIN_COUNTS,
            region_weights: REGION_COUNTS,
            politeness_weights: [0.5, 0.3, 0.2],
            grounding: 0.5,
            efair_rate: 0.5,
            facts: financial_bank(),
            threshold: DEFAULT_THRESHOLD,
            k: DEFAULT_K,
        }
    }
}

impl SynthConfig {
    pub fn triples(&self) -> Vec<KnowledgeTriple> {
        self.facts.iter().map(|e| e.triple.clone()).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        let (lo, hi) = self.turns;
        if lo == 0 || lo > hi {
            return bad(format!("turn range {lo}..={hi} must satisfy 1 <= min <= max"));
        }
        if !(0.0..=1.0).contains(&self.grounding) {
            return bad(format!("grounding rate {} outside [0,1]", self.grounding));
        }
        if !(0.0..=1.0).contains(&self.efair_rate) {
            return bad(format!("efair rate {} outside [0,1]", self.efair_rate));
        }
        for (name, w) in [
            ("domain", &self.domain_weights[..]),
            ("region", &self.region_weights[..]),
            ("politeness", &self.politeness_weights[..]),
        ] {
            if w.iter().any(|x| !x.is_finite() || *x < 0.0) || w.iter().sum::<f64>() <= 0.0 {
                return bad(format!("{name} weights must be non-negative with a positive sum"));
            }
        }
        if self.k == 0 {
            return bad("k must be at least 1".into());
        }
        Ok(())
    }
}

/// A fact paired with the queries that retrieve it.
struct Groundable {
    domain: DomainTag,
    triple: KnowledgeTriple,
    queries: Vec<String>,
}

fn groundable_facts(config: &SynthConfig) -> Result<Vec<Groundable>> {
    let embedder = HashingEmbedder::default();
    let index = KnowledgeIndex::build(&config.triples(), &embedder, config.threshold)?;
    let mut out = Vec::new();
    for entry in &config.facts {
        let mut queries = Vec::new();
        for q in grounded_queries(&entry.triple) {
            let hits = index.retrieve(&embedder, &q, config.k)?;
            if hits.iter().any(|f| f.source == entry.triple) {
                queries.push(q);
            }
        }
        if !queries.is_empty() {
            out.push(Groundable { domain: entry.domain, triple: entry.triple.clone(), queries });
        }
    }
    Ok(out)
}

fn pick<'a, T>(rng: &mut ChaCha8Rng, items: &'a [T]) -> &'a T {
    &items[rng.random_range(0..items.len())]
}

fn bot_response(label: PolitenessLabel, fact: Option<&str>, advice: &str, rng: &mut ChaCha8Rng) -> String {
    let (opener, closer) = match label {
        PolitenessLabel::Polite => (Some(*pick(rng, &POLITE_OPENERS)), Some(*pick(rng, &POLITE_CLOSERS))),
        PolitenessLabel::Neutral => (None, None),
        PolitenessLabel::Impolite => (Some(*pick(rng, &IMPOLITE_OPENERS)), Some(*pick(rng, &IMPOLITE_CLOSERS))),
    };
    [opener, fact, Some(advice), closer].into_iter().flatten().collect::<Vec<_>>().join(" ")
}

/// Generates `config.count` records with ids `dlg-00001`, `dlg-00002`, ...
pub fn synthesize_corpus(config: &SynthConfig, seed: u64) -> Result<Vec<DialogueRecord>> {
    config.validate()?;
    if config.count == 0 {
        return Ok(Vec::new());
    }
    let facts = groundable_facts(config)?;
    if config.grounding > 0.0 && facts.is_empty() {
        return Err(Error::InvalidConfig("grounding requested but no fact is retrievable by its query".into()));
    }
    let domain_dist = WeightedIndex::new(config.domain_weights).expect("validated weights");
    let region_dist = WeightedIndex::new(config.region_weights).expect("validated weights");
    let polite_dist = WeightedIndex::new(config.politeness_weights).expect("validated weights");
    let mut rng = rng::substream(seed, rng::CORPUS_SYNTH);

    let mut records = Vec::with_capacity(config.count);
    for i in 0..config.count {
        let domain = DomainTag::ALL[domain_dist.sample(&mut rng)];
        let region = RegionTag::ALL[region_dist.sample(&mut rng)];
        let politeness = PolitenessLabel::ALL[polite_dist.sample(&mut rng)];
        let n_turns = rng.random_range(config.turns.0..=config.turns.1);
        let in_domain: Vec<&Groundable> = facts.iter().filter(|f| f.domain == domain).collect();
        let pool: Vec<&Groundable> = if in_domain.is_empty() { facts.iter().collect() } else { in_domain };
        let advice = &ADVICE.iter().find(|(d, _)| *d == domain).expect("every domain has advice").1;

        let mut turns = Vec::with_capacity(n_turns);
        for _ in 0..n_turns {
            let grounded = rng.random_bool(config.grounding);
            let advice = *pick(&mut rng, advice);
            let turn = if grounded {
                let fact = *pick(&mut rng, &pool);
                let query = pick(&mut rng, &fact.queries).clone();
                let text = verbalize_text(&fact.triple);
                Turn::new(query, bot_response(politeness, Some(&text), advice, &mut rng))
            } else {
                let head =
                    if pool.is_empty() { "money".to_string() } else { pick(&mut rng, &pool).triple.head.clone() };
                let query = pick(&mut rng, &GENERIC_QUERIES).replace("{head}", &head);
                Turn::new(query, bot_response(politeness, None, advice, &mut rng))
            };
            turns.push(turn);
        }

        let efair = rng.random_bool(config.efair_rate).then(|| {
            let mut r = || rng.random_range(3..=5u8);
            EFairScore { engagement: r(), fluency: r(), adequacy: r(), information_preservation: r(), readability: r() }
        });
        records.push(DialogueRecord { id: format!("dlg-{:05}", i + 1), domain, region, politeness, turns, efair });
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{parse_corpus, to_jsonl, validate_record};

    fn config(count: usize, grounding: f64) -> SynthConfig {
        SynthConfig { count, grounding, ..SynthConfig::default() }
    }

    #[test]
    fn zero_count_is_empty() {
        assert!(synthesize_corpus(&config(0, 0.5), 1).unwrap().is_empty());
    }

    #[test]
    fn records_are_valid_and_deterministic() {
        let a = synthesize_corpus(&config(60, 0.5), 9).unwrap();
        assert_eq!(a, synthesize_corpus(&config(60, 0.5), 9).unwrap());
        assert_ne!(a, synthesize_corpus(&config(60, 0.5), 10).unwrap());
        for r in &a {
            assert!(validate_record(r).is_empty(), "{r:?}");
            assert!((1..=3).contains(&r.turns.len()));
        }
    }

    #[test]
    fn jsonl_roundtrip_is_identical() {
        let a = synthesize_corpus(&config(50, 0.5), 2).unwrap();
        let text = to_jsonl(&a).unwrap();
        let b = parse_corpus(&text).unwrap();
        assert_eq!(a, b);
        assert_eq!(to_jsonl(&b).unwrap(), text);
    }

    #[test]
    fn no_grounding_means_no_fact_text() {
        let cfg = config(100, 0.0);
        let facts: Vec<String> = cfg.facts.iter().map(|e| verbalize_text(&e.triple)).collect();
        for r in synthesize_corpus(&cfg, 4).unwrap() {
            for t in &r.turns {
                assert!(facts.iter().all(|f| !t.bot.contains(f.as_str())));
            }
        }
    }

    #[test]
    fn most_bank_facts_are_groundable() {
        let cfg = SynthConfig::default();
        let n = groundable_facts(&cfg).unwrap().len();
        assert!(n >= 200, "only {n} groundable facts");
    }

    #[test]
    fn bad_configs_are_rejected() {
        assert!(synthesize_corpus(&SynthConfig { turns: (0, 2), ..config(1, 0.5) }, 0).is_err());
        assert!(synthesize_corpus(&SynthConfig { turns: (3, 2), ..config(1, 0.5) }, 0).is_err());
        assert!(synthesize_corpus(&config(1, 1.5), 0).is_err());
        assert!(synthesize_corpus(&SynthConfig { domain_weights: [0.0; 10], ..config(1, 0.5) }, 0).is_err());
        assert!(synthesize_corpus(&SynthConfig { facts: vec![], ..config(1, 0.5) }, 0).is_err());
    }
}
