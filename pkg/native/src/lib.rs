//! Thin pyo3 wrapper over the tfhe-rs boolean API.
//!
//! Gate calls release the GIL so several Python threads can share one cloud key.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyBytes;
use tfhe::boolean::ciphertext::Ciphertext as TfheCiphertext;
use tfhe::boolean::client_key::ClientKey;
use tfhe::boolean::parameters::{BooleanParameters, DEFAULT_PARAMETERS, TFHE_LIB_PARAMETERS};
use tfhe::boolean::public_key::{CompressedPublicKey, PublicKey};
use tfhe::boolean::server_key::{BinaryBooleanGates, CompressedServerKey, ServerKey};

fn params_for(name: &str) -> PyResult<BooleanParameters> {
    match name {
        "default" => Ok(DEFAULT_PARAMETERS),
        "tfhe-lib" => Ok(TFHE_LIB_PARAMETERS),
        other => Err(PyValueError::new_err(format!("unsupported parameter set: {other}"))),
    }
}

fn decode_err(e: bincode::Error) -> PyErr {
    PyValueError::new_err(format!("malformed payload: {e}"))
}

fn encode_err(e: bincode::Error) -> PyErr {
    PyRuntimeError::new_err(format!("serialization failed: {e}"))
}

#[pyclass(module = "hembio_tfhe", frozen)]
#[derive(Clone)]
struct Ciphertext {
    inner: TfheCiphertext,
}

#[pymethods]
impl Ciphertext {
    fn to_bytes<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyBytes>> {
        let raw = bincode::serialize(&self.inner).map_err(encode_err)?;
        Ok(PyBytes::new_bound(py, &raw))
    }

    #[staticmethod]
    fn from_bytes(data: &[u8]) -> PyResult<Self> {
        let inner: TfheCiphertext = bincode::deserialize(data).map_err(decode_err)?;
        Ok(Self { inner })
    }

    #[getter]
    fn is_trivial(&self) -> bool {
        matches!(self.inner, TfheCiphertext::Trivial(_))
    }
}

#[pyclass(module = "hembio_tfhe", frozen)]
struct SecretKey {
    inner: ClientKey,
}

#[pymethods]
impl SecretKey {
    #[new]
    #[pyo3(signature = (params = "default"))]
    fn new(py: Python<'_>, params: &str) -> PyResult<Self> {
        let p = params_for(params)?;
        Ok(py.allow_threads(|| Self { inner: ClientKey::new(&p) }))
    }

    fn encrypt(&self, bit: bool) -> Ciphertext {
        Ciphertext { inner: self.inner.encrypt(bit) }
    }

    fn decrypt(&self, ct: &Ciphertext) -> bool {
        self.inner.decrypt(&ct.inner)
    }

    /// Compressed server key and compressed public key, both serialized.
    fn cloud_key_parts<'py>(
        &self,
        py: Python<'py>,
    ) -> PyResult<(Bound<'py, PyBytes>, Bound<'py, PyBytes>)> {
        let (sk, pk) = py.allow_threads(|| {
            let sk = bincode::serialize(&CompressedServerKey::new(&self.inner));
            let pk = bincode::serialize(&CompressedPublicKey::new(&self.inner));
            (sk, pk)
        });
        let sk = sk.map_err(encode_err)?;
        let pk = pk.map_err(encode_err)?;
        Ok((PyBytes::new_bound(py, &sk), PyBytes::new_bound(py, &pk)))
    }

    fn to_bytes<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyBytes>> {
        let raw = bincode::serialize(&self.inner).map_err(encode_err)?;
        Ok(PyBytes::new_bound(py, &raw))
    }

    #[staticmethod]
    fn from_bytes(data: &[u8]) -> PyResult<Self> {
        let inner: ClientKey = bincode::deserialize(data).map_err(decode_err)?;
        Ok(Self { inner })
    }
}

#[pyclass(module = "hembio_tfhe", frozen)]
struct CloudKey {
    server: ServerKey,
    public: PublicKey,
}

#[pymethods]
impl CloudKey {
    #[staticmethod]
    fn from_parts(py: Python<'_>, server: &[u8], public: &[u8]) -> PyResult<Self> {
        let server: CompressedServerKey = bincode::deserialize(server).map_err(decode_err)?;
        let public: CompressedPublicKey = bincode::deserialize(public).map_err(decode_err)?;
        Ok(py.allow_threads(|| Self {
            server: server.decompress(),
            public: public.decompress(),
        }))
    }

    fn trivial(&self, bit: bool) -> Ciphertext {
        Ciphertext { inner: self.server.trivial_encrypt(bit) }
    }

    fn encrypt_public(&self, py: Python<'_>, bit: bool) -> Ciphertext {
        py.allow_threads(|| Ciphertext { inner: self.public.encrypt(bit) })
    }

    fn not_(&self, a: &Ciphertext) -> Ciphertext {
        Ciphertext { inner: self.server.not(&a.inner) }
    }

    fn and_(&self, py: Python<'_>, a: &Ciphertext, b: &Ciphertext) -> Ciphertext {
        py.allow_threads(|| Ciphertext { inner: self.server.and(&a.inner, &b.inner) })
    }

    fn or_(&self, py: Python<'_>, a: &Ciphertext, b: &Ciphertext) -> Ciphertext {
        py.allow_threads(|| Ciphertext { inner: self.server.or(&a.inner, &b.inner) })
    }

    fn xor_(&self, py: Python<'_>, a: &Ciphertext, b: &Ciphertext) -> Ciphertext {
        py.allow_threads(|| Ciphertext { inner: self.server.xor(&a.inner, &b.inner) })
    }

    fn xnor_(&self, py: Python<'_>, a: &Ciphertext, b: &Ciphertext) -> Ciphertext {
        py.allow_threads(|| Ciphertext { inner: self.server.xnor(&a.inner, &b.inner) })
    }

    fn mux(&self, py: Python<'_>, sel: &Ciphertext, t: &Ciphertext, f: &Ciphertext) -> Ciphertext {
        py.allow_threads(|| Ciphertext { inner: self.server.mux(&sel.inner, &t.inner, &f.inner) })
    }
}

#[pymodule]
fn hembio_tfhe(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Ciphertext>()?;
    m.add_class::<SecretKey>()?;
    m.add_class::<CloudKey>()?;
    m.add("PARAMETER_SETS", ("default", "tfhe-lib"))?;
    Ok(())
}
