//! Horizontal-to-tilted transposition: beam, sky-diffuse and
//! ground-reflected irradiance on the plane of a PV array.

use crate::decomposition::IrradianceComponents;
use crate::error::{Error, Result};
use crate::ingest::StationMeta;
use crate::solargeom::{self, PanelOrientation, SolarPosition, SOLAR_CONSTANT};

/// Floor for `cos θz` in the circumsolar ratio (cos 85°).
const MIN_COS_ZENITH: f64 = 0.087_155_742_747_658_18;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SkyVariant {
    Isotropic,
    /// Circumsolar plus isotropic mix weighted by the anisotropy index.
    Anisotropic,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SkyModel {
    pub variant: SkyVariant,
    pub albedo: f64,
}

impl SkyModel {
    pub fn new(variant: SkyVariant, albedo: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&albedo) {
            return Err(Error::Domain(format!("albedo {albedo} outside [0, 1]")));
        }
        Ok(Self { variant, albedo })
    }
}

impl Default for SkyModel {
    fn default() -> Self {
        Self {
            variant: SkyVariant::Anisotropic,
            albedo: 0.2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoaIrradiance {
    pub g_beam: f64,
    pub g_diffuse: f64,
    pub g_reflected: f64,
    pub g_total: f64,
}

/// Beam clearness `dni / (S0 · eccentricity)`, clamped to `[0, 1]`.
pub fn anisotropy_index(components: &IrradianceComponents, pos: &SolarPosition) -> f64 {
    if components.dni <= 0.0 || !pos.is_daylight() {
        return 0.0;
    }
    (components.dni / solargeom::extraterrestrial_normal(pos, SOLAR_CONSTANT)).clamp(0.0, 1.0)
}

pub fn poa(
    components: &IrradianceComponents,
    pos: &SolarPosition,
    panel: &PanelOrientation,
    sky: &SkyModel,
    site: &StationMeta,
) -> PoaIrradiance {
    let f1 = match sky.variant {
        SkyVariant::Isotropic => 0.0,
        SkyVariant::Anisotropic => anisotropy_index(components, pos),
    };
    poa_with_anisotropy(components, pos, panel, sky.albedo, site, f1)
}

/// Transposition with an explicit anisotropy index; `f1 = 0` is the
/// isotropic sky.
pub fn poa_with_anisotropy(
    components: &IrradianceComponents,
    pos: &SolarPosition,
    panel: &PanelOrientation,
    albedo: f64,
    site: &StationMeta,
    f1: f64,
) -> PoaIrradiance {
    let cos_theta = solargeom::cos_incidence(pos, site, panel).max(0.0);
    let cos_beta = panel.tilt.cos();
    let sky_view = (1.0 + cos_beta) / 2.0;

    let g_beam = components.dni * cos_theta;
    let circumsolar = cos_theta / pos.cos_zenith().max(MIN_COS_ZENITH);
    let g_diffuse = components.dhi * (f1 * circumsolar + (1.0 - f1) * sky_view);
    let g_reflected = components.ghi * albedo * (1.0 - cos_beta) / 2.0;
    PoaIrradiance {
        g_beam,
        g_diffuse,
        g_reflected,
        g_total: g_beam + g_diffuse + g_reflected,
    }
}
