//! TCP transport: one thread per connection, requests answered in order.

use std::io::{self, BufReader, BufWriter};
use std::net::{TcpListener, TcpStream, ToSocketAddrs};
use std::sync::Arc;
use std::thread;

use ctxauth_core::protect::UserId;
use log::{debug, warn};
use thiserror::Error;

use crate::service::Service;
use crate::wire::{read_request, read_response, write_all, MessageType, Request, Response, Status};

/// Accepts connections until the listener fails.
pub fn serve(listener: TcpListener, service: Arc<Service>) -> io::Result<()> {
    for conn in listener.incoming() {
        let stream = match conn {
            Ok(s) => s,
            Err(e) => {
                warn!("accept failed: {e}");
                continue;
            }
        };
        let svc = service.clone();
        thread::spawn(move || {
            let peer = stream.peer_addr().ok();
            if let Err(e) = handle_connection(stream, &svc) {
                debug!("connection {peer:?} closed: {e}");
            }
        });
    }
    Ok(())
}

fn handle_connection(stream: TcpStream, svc: &Service) -> io::Result<()> {
    let mut reader = BufReader::new(stream.try_clone()?);
    let mut writer = BufWriter::new(stream);
    loop {
        let req = match read_request(&mut reader) {
            Ok(Some(r)) => r,
            Ok(None) => return Ok(()),
            Err(e) if e.kind() == io::ErrorKind::InvalidData => {
                // Framing is lost; answer once and hang up.
                write_all(&mut writer, &Response::error(Status::BadRequest, e.to_string()).encode())?;
                return Ok(());
            }
            Err(e) => return Err(e),
        };
        write_all(&mut writer, &svc.handle(&req).encode())?;
    }
}

#[derive(Debug, Error)]
pub enum ClientError {
    #[error("cannot reach server: {0}")]
    Connect(io::Error),
    #[error("connection failed: {0}")]
    Io(#[from] io::Error),
}

pub struct Client {
    reader: BufReader<TcpStream>,
    writer: BufWriter<TcpStream>,
}

impl Client {
    pub fn connect<A: ToSocketAddrs>(addr: A) -> Result<Self, ClientError> {
        let stream = TcpStream::connect(addr).map_err(ClientError::Connect)?;
        Ok(Self { reader: BufReader::new(stream.try_clone()?), writer: BufWriter::new(stream) })
    }

    pub fn request(&mut self, req: &Request) -> Result<Response, ClientError> {
        write_all(&mut self.writer, &req.encode())?;
        Ok(read_response(&mut self.reader)?)
    }

    pub fn ingest(&mut self, envelope: &[u8]) -> Result<Response, ClientError> {
        self.request(&Request::new(MessageType::Ingest, envelope.to_vec()))
    }

    pub fn authenticate(&mut self, envelope: &[u8]) -> Result<Response, ClientError> {
        self.request(&Request::new(MessageType::Authenticate, envelope.to_vec()))
    }

    pub fn enroll(&mut self, user: &UserId) -> Result<Response, ClientError> {
        self.request(&Request::new(MessageType::Enroll, user.0.to_vec()))
    }

    pub fn refresh(&mut self, user: &UserId) -> Result<Response, ClientError> {
        self.request(&Request::new(MessageType::Refresh, user.0.to_vec()))
    }

    pub fn status(&mut self, user: &UserId) -> Result<Response, ClientError> {
        self.request(&Request::new(MessageType::Status, user.0.to_vec()))
    }
}
