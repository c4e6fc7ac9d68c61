pub mod analytic_oracle;
pub mod eval_oracle;
pub mod hitl_oracle;
pub mod morpho_oracle;
pub mod stats_oracle;
