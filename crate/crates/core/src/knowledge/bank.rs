//! Built-in financial commonsense bank used by the synthetic corpus.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{KnowledgeTriple, RelationTag};
use crate::corpus::DomainTag;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BankEntry {
    pub domain: DomainTag,
    pub triple: KnowledgeTriple,
}

const HEADS: [(DomainTag, [&str; 12]); 10] = [
    (
        DomainTag::Stock,
        [
            "blue chips",
            "penny stocks",
            "growth stocks",
            "value stocks",
            "stock splits",
            "share buybacks",
            "dividend stocks",
            "stock options",
            "preferred shares",
            "market orders",
            "limit orders",
            "stock screeners",
        ],
    ),
    (
        DomainTag::Investment,
        [
            "mutual funds",
            "index funds",
            "bond ladders",
            "real estate",
            "gold bullion",
            "venture capital",
            "target funds",
            "municipal bonds",
            "treasury bills",
            "annuity contracts",
            "robo advisors",
            "asset allocation",
        ],
    ),
    (
        DomainTag::PersonalFinance,
        [
            "emergency funds",
            "monthly budgets",
            "sinking funds",
            "expense trackers",
            "net worth",
            "spending plans",
            "savings goals",
            "estate plans",
            "life insurance",
            "health savings",
            "pension plans",
            "retirement accounts",
        ],
    ),
    (
        DomainTag::Banking,
        [
            "checking accounts",
            "savings accounts",
            "certificates deposit",
            "wire transfers",
            "online banking",
            "overdraft protection",
            "direct deposit",
            "debit cards",
            "safe deposits",
            "credit unions",
            "money orders",
            "cashier checks",
        ],
    ),
    (
        DomainTag::Loan,
        [
            "home loans",
            "student loans",
            "auto loans",
            "payday loans",
            "personal loans",
            "loan refinancing",
            "fixed rates",
            "variable rates",
            "loan collateral",
            "debt consolidation",
            "cosigned loans",
            "bridge loans",
        ],
    ),
    (
        DomainTag::GeneralFinance,
        [
            "compound interest",
            "inflation hedges",
            "interest rates",
            "credit scores",
            "financial advisors",
            "economic cycles",
            "liquidity ratios",
            "cash flow",
            "risk tolerance",
            "time horizons",
            "opportunity costs",
            "financial statements",
        ],
    ),
    (
        DomainTag::CreditCard,
        [
            "credit cards",
            "reward cards",
            "secured cards",
            "balance transfers",
            "card statements",
            "cash advances",
            "travel cards",
            "credit limits",
            "minimum payments",
            "annual fees",
            "card autopay",
            "cashback cards",
        ],
    ),
    (
        DomainTag::Tax,
        [
            "tax returns",
            "tax deductions",
            "tax credits",
            "capital gains",
            "tax brackets",
            "withholding allowances",
            "estimated taxes",
            "tax refunds",
            "property taxes",
            "payroll taxes",
            "tax audits",
            "filing extensions",
        ],
    ),
    (
        DomainTag::Trading,
        [
            "day trading",
            "swing trading",
            "margin accounts",
            "stop losses",
            "short selling",
            "futures contracts",
            "forex pairs",
            "trading journals",
            "candlestick charts",
            "moving averages",
            "trading bots",
            "options spreads",
        ],
    ),
    (
        DomainTag::Others,
        [
            "crypto wallets",
            "peer lending",
            "crowdfunding platforms",
            "gift cards",
            "insurance claims",
            "charitable giving",
            "rental income",
            "side hustles",
            "barter trades",
            "estate sales",
            "price alerts",
            "coupon apps",
        ],
    ),
];

const GERUNDS: [&str; 24] = [
    "building",
    "protecting",
    "growing",
    "reducing",
    "tracking",
    "managing",
    "hedging",
    "lowering",
    "boosting",
    "balancing",
    "securing",
    "funding",
    "spreading",
    "measuring",
    "limiting",
    "earning",
    "saving",
    "covering",
    "stabilizing",
    "planning",
    "financing",
    "shielding",
    "doubling",
    "smoothing",
];

const OBJECTS: [&str; 24] = [
    "wealth",
    "risk",
    "income",
    "debt",
    "returns",
    "expenses",
    "savings",
    "volatility",
    "liquidity",
    "losses",
    "capital",
    "payments",
    "costs",
    "profits",
    "assets",
    "cashflow",
    "portfolios",
    "retirement",
    "emergencies",
    "purchases",
    "equity",
    "interest",
    "taxes",
    "dividends",
];

const BANK_SEED: u64 = 0x00f1_4a11;

/// Every head contributes one `UsedFor` and one `RelatedTo` fact; tails are
/// distinct `gerund object` phrases fixed by an internal seed. A handful of
/// user-state facts (`xIntent`, `xWant`, ...) follow.
pub fn financial_bank() -> Vec<BankEntry> {
    let mut tails: Vec<(usize, usize)> =
        (0..GERUNDS.len()).flat_map(|g| (0..OBJECTS.len()).map(move |o| (g, o))).collect();
    tails.shuffle(&mut ChaCha8Rng::seed_from_u64(BANK_SEED));
    let mut tails = tails.into_iter().map(|(g, o)| format!("{} {}", GERUNDS[g], OBJECTS[o]));

    let mut out = Vec::new();
    for (domain, heads) in HEADS {
        for head in heads {
            for relation in [RelationTag::UsedFor, RelationTag::RelatedTo] {
                let tail = tails.next().expect("tail pool covers the bank");
                out.push(BankEntry { domain, triple: KnowledgeTriple::new(head, relation, tail) });
            }
        }
    }

    let user_state = [
        (DomainTag::Stock, "stocks", RelationTag::XIntent, "to know the difference"),
        (DomainTag::Investment, "bonds", RelationTag::XWant, "to buy a bond"),
        (DomainTag::Investment, "investing", RelationTag::XNeed, "to be interested in investing"),
        (DomainTag::PersonalFinance, "saving", RelationTag::XReason, "to prepare for the future"),
        (DomainTag::Loan, "borrowing", RelationTag::XEffect, "to owe interest"),
    ];
    for (domain, head, relation, tail) in user_state {
        out.push(BankEntry { domain, triple: KnowledgeTriple::new(head, relation, tail) });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn bank_is_deterministic_and_distinct() {
        let a = financial_bank();
        assert_eq!(a, financial_bank());
        let triples: HashSet<_> = a.iter().map(|e| &e.triple).collect();
        assert_eq!(triples.len(), a.len());
        let tails: HashSet<_> = a.iter().map(|e| &e.triple.tail).collect();
        assert_eq!(tails.len(), a.len());
        let heads: HashSet<_> = HEADS.iter().flat_map(|(_, h)| h.iter()).collect();
        assert_eq!(heads.len(), 120);
    }

    #[test]
    fn every_domain_is_covered() {
        let bank = financial_bank();
        for d in DomainTag::ALL {
            assert!(bank.iter().any(|e| e.domain == d));
        }
    }
}
