pub mod bounds_cmd;
pub mod fig_optimal_k;
pub mod fig_tradeoff;
pub mod gen_mdp;
pub mod grad_demo;
pub mod train;
