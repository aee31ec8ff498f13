//! Online POMDP planning with logic-rule policy heuristics.

pub mod logic;
pub mod features;
pub mod induction;
pub mod pocman;
pub mod pomdp;
pub mod rocksample;
pub mod cdpi;
pub mod despot;
pub mod episode;
pub mod planner;
pub mod pomcp;
pub mod trace;
