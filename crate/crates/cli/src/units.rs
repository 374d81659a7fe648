//! Physical quantities in config files: either a bare SI number or a
//! `"value unit"` string such as `"30 nm"` or `"1e-9 Torr"`.

use std::fmt;
use std::marker::PhantomData;

use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use librotrap::constants::{ELEMENTARY_CHARGE, GAUSS, TORR};

pub trait Dimension {
    const NAME: &'static str;
    /// Accepted unit symbols with their SI scale factors; the first is SI.
    const UNITS: &'static [(&'static str, f64)];
}

macro_rules! dimension {
    ($ty:ident, $name:literal, [$(($sym:literal, $scale:expr)),+ $(,)?]) => {
        #[derive(Debug, Clone, Copy, PartialEq)]
        pub struct $ty;
        impl Dimension for $ty {
            const NAME: &'static str = $name;
            const UNITS: &'static [(&'static str, f64)] = &[$(($sym, $scale)),+];
        }
    };
}

const AMU: f64 = 1.660_539_066_60e-27;

dimension!(LengthDim, "length", [("m", 1.0), ("mm", 1e-3), ("um", 1e-6), ("μm", 1e-6), ("nm", 1e-9), ("pm", 1e-12)]);
dimension!(VoltageDim, "voltage", [("V", 1.0), ("mV", 1e-3), ("kV", 1e3)]);
dimension!(FrequencyDim, "frequency", [("Hz", 1.0), ("kHz", 1e3), ("MHz", 1e6)]);
dimension!(TimeDim, "time", [("s", 1.0), ("ms", 1e-3), ("us", 1e-6), ("μs", 1e-6), ("ns", 1e-9)]);
dimension!(PressureDim, "pressure", [("Pa", 1.0), ("mbar", 100.0), ("Torr", TORR)]);
dimension!(TemperatureDim, "temperature", [("K", 1.0), ("mK", 1e-3), ("uK", 1e-6), ("μK", 1e-6), ("nK", 1e-9)]);
dimension!(FieldDim, "magnetic field", [("T", 1.0), ("mT", 1e-3), ("G", GAUSS), ("mG", 1e-3 * GAUSS)]);
dimension!(ChargeDim, "charge", [("C", 1.0), ("e", ELEMENTARY_CHARGE)]);
dimension!(MassDim, "mass", [("kg", 1.0), ("g", 1e-3), ("amu", AMU)]);
dimension!(DensityDim, "density", [("kg/m^3", 1.0), ("g/cm^3", 1e3)]);
dimension!(InertiaDim, "moment of inertia", [("kg m^2", 1.0)]);
dimension!(AccelerationDim, "acceleration", [("m/s^2", 1.0)]);

/// A value stored in SI units. Serializes as the bare SI number.
pub struct Quantity<D> {
    pub si: f64,
    _dim: PhantomData<D>,
}

impl<D> Quantity<D> {
    pub const fn si(si: f64) -> Self {
        Self { si, _dim: PhantomData }
    }
}

impl<D> Clone for Quantity<D> {
    fn clone(&self) -> Self {
        *self
    }
}
impl<D> Copy for Quantity<D> {}

impl<D> fmt::Debug for Quantity<D> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.si)
    }
}

impl<D> PartialEq for Quantity<D> {
    fn eq(&self, other: &Self) -> bool {
        self.si == other.si
    }
}

pub type Length = Quantity<LengthDim>;
pub type Voltage = Quantity<VoltageDim>;
pub type Frequency = Quantity<FrequencyDim>;
pub type Time = Quantity<TimeDim>;
pub type Pressure = Quantity<PressureDim>;
pub type Temperature = Quantity<TemperatureDim>;
pub type Field = Quantity<FieldDim>;
pub type Charge = Quantity<ChargeDim>;
pub type Mass = Quantity<MassDim>;
pub type Density = Quantity<DensityDim>;
pub type Inertia = Quantity<InertiaDim>;
pub type Acceleration = Quantity<AccelerationDim>;

/// Parses `"<number> <unit>"`; the space is optional.
pub fn parse<D: Dimension>(text: &str) -> Result<f64, String> {
    let text = text.trim();
    let split = text
        .char_indices()
        .find(|&(i, c)| {
            // an exponent `e` directly after a digit belongs to the number
            c.is_alphabetic()
                && !(matches!(c, 'e' | 'E')
                    && text[i + 1..].starts_with(|n: char| n.is_ascii_digit() || n == '-' || n == '+'))
        })
        .map_or(text.len(), |(i, _)| i);
    let (number, unit) = (text[..split].trim(), text[split..].trim());
    let value: f64 = number.parse().map_err(|_| format!("cannot read a number from `{text}` ({})", D::NAME))?;
    let unit = if unit.is_empty() { D::UNITS[0].0 } else { unit };
    let scale = D::UNITS.iter().find(|(sym, _)| *sym == unit).map(|&(_, s)| s).ok_or_else(|| {
        let known: Vec<&str> = D::UNITS.iter().map(|(s, _)| *s).collect();
        format!("unknown {} unit `{unit}`; expected one of {}", D::NAME, known.join(", "))
    })?;
    Ok(value * scale)
}

impl<'de, D: Dimension> Deserialize<'de> for Quantity<D> {
    fn deserialize<De: Deserializer<'de>>(deserializer: De) -> Result<Self, De::Error> {
        struct V<D>(PhantomData<D>);
        impl<D: Dimension> Visitor<'_> for V<D> {
            type Value = Quantity<D>;
            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "a {} as an SI number or a \"value unit\" string", D::NAME)
            }
            fn visit_f64<E: de::Error>(self, v: f64) -> Result<Self::Value, E> {
                Ok(Quantity::si(v))
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> Result<Self::Value, E> {
                Ok(Quantity::si(v as f64))
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> Result<Self::Value, E> {
                Ok(Quantity::si(v as f64))
            }
            fn visit_str<E: de::Error>(self, v: &str) -> Result<Self::Value, E> {
                parse::<D>(v).map(Quantity::si).map_err(E::custom)
            }
        }
        deserializer.deserialize_any(V(PhantomData))
    }
}

impl<D> Serialize for Quantity<D> {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(self.si)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn conveniences() {
        assert_eq!(parse::<LengthDim>("30 nm").unwrap(), 30.0 * 1e-9);
        assert_eq!(parse::<FieldDim>("10 G").unwrap(), 1e-3);
        assert_eq!(parse::<PressureDim>("1e-9 Torr").unwrap(), 1e-9 * TORR);
        assert_eq!(parse::<FrequencyDim>("250kHz").unwrap(), 2.5e5);
        assert_eq!(parse::<ChargeDim>("100 e").unwrap(), 100.0 * ELEMENTARY_CHARGE);
        assert_eq!(parse::<TimeDim>("2.5e-3").unwrap(), 2.5e-3);
        assert_eq!(parse::<TimeDim>("4E-6 s").unwrap(), 4e-6);
    }

    #[test]
    fn wrong_units_are_rejected() {
        let err = parse::<LengthDim>("3 Torr").unwrap_err();
        assert!(err.contains("unknown length unit"), "{err}");
        assert!(parse::<LengthDim>("abc nm").is_err());
    }
}
