//! Membrane-potential backpropagation.
//!
//! At each time step the output layer's potential is pulled towards
//! `v_th · target` on the neurons whose spike bit is wrong (the XOR mask).
//! Gradients flow through the eligibility traces `∂V_mem/∂W` of both layers,
//! with the sigmoid surrogate standing in for the hidden threshold, and the
//! weights take one Adam step per time step.

mod adam;
mod loss;
mod trace;

pub use adam::{adam_timestep_update, AdamTimeState, Hyperparams};
pub use loss::{
    compute_mask, hidden_delta, masked_loss, masked_loss_with_mask, output_delta, target_potential,
    StepLoss,
};
pub use trace::{
    hidden_layer_gradient, output_layer_gradient, trace_gradient, update_trace, EligibilityTrace,
};
