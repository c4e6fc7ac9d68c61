use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::{decode_probability, encode_gray_png, GrayImage, ProbabilityGrid};

fn default_timeout() -> u64 {
    30
}

/// A remote segmentation model reached over HTTP.
///
/// Protocol: `POST {url}/segment` with the image as PNG bytes; the response
/// body is a `VPRB1` probability file of the same dimensions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExternalEndpoint {
    pub url: String,
    /// Forwarded verbatim as the `Authorization` header when present.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub auth_header: Option<String>,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
    pub threshold: f64,
}

impl ExternalEndpoint {
    pub fn new(url: impl Into<String>, threshold: f64) -> Self {
        Self {
            url: url.into(),
            auth_header: None,
            timeout_secs: default_timeout(),
            threshold,
        }
    }

    fn segment_url(&self) -> String {
        format!("{}/segment", self.url.trim_end_matches('/'))
    }

    pub fn segment(&self, img: &GrayImage) -> Result<ProbabilityGrid> {
        let png = encode_gray_png(img)?;
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(self.timeout_secs)))
            .build()
            .into();
        let mut req = agent
            .post(&self.segment_url())
            .header("Content-Type", "image/png");
        if let Some(auth) = &self.auth_header {
            req = req.header("Authorization", auth);
        }
        let mut resp = req
            .send(&png[..])
            .map_err(|e| Error::Backend(format!("{}: {e}", self.segment_url())))?;
        let body = resp
            .body_mut()
            .with_config()
            .limit(u64::MAX)
            .read_to_vec()
            .map_err(|e| Error::Backend(format!("reading response: {e}")))?;
        let grid = decode_probability(&body)
            .map_err(|e| Error::Backend(format!("bad probability payload: {e}")))?;
        if grid.dims() != img.dims() {
            return Err(Error::DimensionMismatch {
                expected: img.dims(),
                actual: grid.dims(),
            });
        }
        Ok(grid)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presegment::{propose, SegmenterBackend};
    use crate::raster::encode_probability;
    use std::io::{BufRead, BufReader, Read, Write};
    use std::net::TcpListener;
    use std::sync::mpsc;

    /// One-shot HTTP server answering with the given grid; reports the
    /// request line and headers it saw.
    fn serve_once(grid: ProbabilityGrid) -> (String, mpsc::Receiver<Vec<String>>) {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        let (tx, rx) = mpsc::channel();
        std::thread::spawn(move || {
            let (mut stream, _) = listener.accept().unwrap();
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut head = Vec::new();
            let mut len = 0usize;
            loop {
                let mut line = String::new();
                reader.read_line(&mut line).unwrap();
                let line = line.trim_end().to_string();
                if line.is_empty() {
                    break;
                }
                if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                    len = v.trim().parse().unwrap();
                }
                head.push(line);
            }
            let mut body = vec![0; len];
            reader.read_exact(&mut body).unwrap();
            assert!(crate::raster::decode_gray_png(&body).is_ok());
            let payload = encode_probability(&grid);
            write!(
                stream,
                "HTTP/1.1 200 OK\r\nContent-Length: {}\r\nConnection: close\r\n\r\n",
                payload.len()
            )
            .unwrap();
            stream.write_all(&payload).unwrap();
            tx.send(head).unwrap();
        });
        (format!("http://{addr}"), rx)
    }

    #[test]
    fn posts_png_and_thresholds_response() {
        let grid = ProbabilityGrid::new(3, 1, vec![0.2, 0.6, 0.5]).unwrap();
        let (url, seen) = serve_once(grid.clone());
        let mut ep = ExternalEndpoint::new(url, 0.5);
        ep.auth_header = Some("Bearer abc".into());
        let img = GrayImage::filled(3, 1, 10);
        let (got, mask) = propose(&img, &SegmenterBackend::External(ep)).unwrap();
        assert_eq!(got, grid);
        assert_eq!(mask.bits(), &[0, 1, 1]);
        let head = seen.recv().unwrap();
        assert!(head[0].starts_with("POST /segment "));
        assert!(head
            .iter()
            .any(|h| h == "authorization: Bearer abc" || h == "Authorization: Bearer abc"));
    }

    #[test]
    fn wrong_dimensions_rejected() {
        let (url, _seen) = serve_once(ProbabilityGrid::zeros(2, 2));
        let ep = ExternalEndpoint::new(url, 0.5);
        let err = ep.segment(&GrayImage::filled(3, 3, 0)).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { .. }));
    }

    #[test]
    fn unreachable_service_is_backend_error() {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        drop(listener);
        let mut ep = ExternalEndpoint::new(format!("http://{addr}"), 0.5);
        ep.timeout_secs = 2;
        let err = ep.segment(&GrayImage::filled(3, 3, 0)).unwrap_err();
        assert!(matches!(err, Error::Backend(_)));
    }
}
