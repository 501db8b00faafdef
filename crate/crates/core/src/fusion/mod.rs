//! Chunk fusion: memory-bounded spatial merging of co-located chunks and
//! padding-free temporal packing, with a masked GRU reference kernel.

mod gru;
mod packing;
mod spatial;

pub use gru::{gru_forward_masked, GruCell};
pub use packing::{
    ffd_bin_bound, naive_padding, pack_sequences, padding_waste, PackedBatch, SlotRef,
};
pub use spatial::{
    plan_device_fusion, plan_spatial_fusion, DeviceFusion, Footprint, FusionGroup, FusionPlan,
    MemoryCoeffs,
};
