//! Seeded campaigns over the conjectures and remainder terms, and the property suite.

pub mod campaigns;
pub mod report;
pub mod suite;

pub use campaigns::{conjecture1_instance, Campaign, CampaignOptions, Conjecture1Instance, RemainderKind, Side, DEFAULT_GRID};
pub use report::{Aggregate, CampaignReport, Metadata, TrialReport};
pub use suite::{run_property_suite, CheckResult, SuiteOptions, SuiteReport};
