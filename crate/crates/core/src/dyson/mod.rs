//! Channel-resolved perturbative amplitudes and their closed forms.

mod channel;
mod closed_form;
mod ladder;

pub use channel::{enumerate_orderings, ChannelAmplitude, ChannelSpec};
pub use closed_form::{
    additivity, additivity_closed_form, additivity_coefficients, additivity_maxima,
    fringe_pattern, fringe_period, scaling_probability, visibility, visibility_coefficients,
    visibility_from_intensities, AdditivityMaximum, ColorDrive, FringeParams, Overlap,
};
pub use ladder::{channel_amplitude, channel_amplitudes, MAX_PHASE_PER_STEP, MIN_STEPS_PER_FWHM};
