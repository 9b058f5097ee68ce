pub mod cli;
pub mod crrp;
pub mod ingest;
pub mod lp;
pub mod netgraph;
pub mod rebalance;
pub mod simulator;
pub mod routing;
