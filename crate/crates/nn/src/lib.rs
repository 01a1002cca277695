//! Reverse-mode automatic differentiation over small dense 2-D tensors.
//!
//! The engine is deliberately narrow: it carries exactly the primitives a
//! toy vision-transformer codec needs (dense layers, layer norm, GeLU,
//! PReLU, row softmax, attention matmuls, index gathers, a packed complex
//! linear map for differentiating through a MIMO channel, and power
//! normalization). A [`Graph`] is recorded per forward pass and dropped
//! after [`Graph::backward`].
//!
//! ```
//! use jscc_nn::{Graph, ParameterStore, Tensor};
//!
//! let mut store = ParameterStore::new();
//! store.insert("w", Tensor::new(vec![1, 1], vec![3.0]));
//! let mut g = Graph::new();
//! let w = g.param(&store, "w").unwrap();
//! let y = g.mul(w, w).unwrap();
//! let loss = g.sum(y);
//! g.backward(loss, &mut store).unwrap();
//! assert_eq!(store.get("w").unwrap().grad.as_ref().unwrap()[0], 6.0);
//! ```

mod adam;
mod checkpoint;
mod error;
mod gradcheck;
mod graph;
mod tensor;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, MAGIC};
pub use error::{NnError, Result};
pub use gradcheck::{
    analytic_gradients, compare_gradients, gradient_check, GradCheckOptions, GradCheckReport, GradientMap,
};
pub use graph::{gelu_scalar, Graph, Var, ZERO_INDEX};
pub use tensor::{ParameterStore, Tensor, SCHEMA_VERSION};
