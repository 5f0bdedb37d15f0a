//! Declarative network descriptions, the teacher → linear-counterpart
//! transform, batched execution with a gradient tape, and parameter files.

mod exec;
mod params;
mod spec;

pub use exec::{backward, features, forward, Tape};
pub use params::{
    copy_backend, load_params, load_params_for, save_params, Param, ParamGrads, ParamStore, PARAM_MAGIC, PARAM_VERSION,
};
pub use spec::{
    backend_only, linear_counterpart, max_pool_counterpart, mini_teacher, param_name, ActShape, LayerSpec, NetworkSpec,
};
