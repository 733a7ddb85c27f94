//! Salted Argon2id password hashing.

use argon2::{Algorithm, Argon2, Params, Version};
use subtle::ConstantTimeEq;

pub const SALT_LEN: usize = 16;
pub const HASH_LEN: usize = 32;
pub const MIN_PASSWORD_CHARS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PasswordParams {
    /// Memory cost in KiB.
    pub m_cost: u32,
    pub t_cost: u32,
    pub p_cost: u32,
}

impl Default for PasswordParams {
    fn default() -> Self {
        PasswordParams {
            m_cost: 19 * 1024,
            t_cost: 2,
            p_cost: 1,
        }
    }
}

impl PasswordParams {
    /// Cheapest parameters Argon2 accepts. Simulation and tests only.
    pub const fn insecure_fast() -> Self {
        PasswordParams {
            m_cost: 8,
            t_cost: 1,
            p_cost: 1,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        Params::new(self.m_cost, self.t_cost, self.p_cost, Some(HASH_LEN))
            .map(|_| ())
            .map_err(|e| e.to_string())
    }

    fn hasher(&self) -> Argon2<'static> {
        let params = Params::new(self.m_cost, self.t_cost, self.p_cost, Some(HASH_LEN))
            .expect("parameters validated at construction");
        Argon2::new(Algorithm::Argon2id, Version::V0x13, params)
    }
}

pub fn hash_password(params: &PasswordParams, password: &str, salt: &[u8; SALT_LEN]) -> [u8; HASH_LEN] {
    let mut out = [0u8; HASH_LEN];
    params
        .hasher()
        .hash_password_into(password.as_bytes(), salt, &mut out)
        .expect("salt and output lengths are valid");
    out
}

pub fn verify_password(
    params: &PasswordParams,
    password: &str,
    salt: &[u8; SALT_LEN],
    expected: &[u8; HASH_LEN],
) -> bool {
    hash_password(params, password, salt).ct_eq(expected).into()
}

pub fn is_strong_enough(password: &str) -> bool {
    password.chars().count() >= MIN_PASSWORD_CHARS
}
