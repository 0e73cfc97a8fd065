//! Flat CSV layout for federations.
//!
//! One row per sample: `client_id,sample_id,split,height,width`, followed by
//! `height*width` row-major intensities (`px_0..`) and the same number of
//! mask bits (`mask_0..`). All clients in one file share the image size.

use std::io::{Read, Write};

use super::generate::{ClientDataset, Split, SplitTag};
use crate::error::{input, Error, Result};

pub fn write_federation<W: Write>(federation: &[ClientDataset], out: W) -> Result<()> {
    let Some(first) = federation.first() else {
        return input("empty federation");
    };
    let pixels = first.pixels();
    if federation.iter().any(|c| c.pixels() != pixels) {
        return input("all clients must share the image size");
    }
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["client_id".to_string(), "sample_id".into(), "split".into(), "height".into(), "width".into()];
    header.extend((0..pixels).map(|i| format!("px_{i}")));
    header.extend((0..pixels).map(|i| format!("mask_{i}")));
    w.write_record(&header)?;
    for client in federation {
        for (i, (img, mask)) in client.images.iter().zip(&client.masks).enumerate() {
            let tag = client
                .split
                .tag_of(i)
                .ok_or_else(|| Error::Input(format!("sample {i} is not in any split")))?;
            let mut row = vec![
                client.client_id.to_string(),
                i.to_string(),
                tag.as_str().to_string(),
                client.height.to_string(),
                client.width.to_string(),
            ];
            row.extend(img.iter().map(|v| v.to_string()));
            row.extend(mask.iter().map(|m| m.to_string()));
            w.write_record(&row)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_federation<R: Read>(input_data: R) -> Result<Vec<ClientDataset>> {
    let mut r = csv::Reader::from_reader(input_data);
    let mut clients: Vec<ClientDataset> = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let field = |i: usize| rec.get(i).ok_or_else(|| Error::Input("truncated row".into()));
        let num = |i: usize| -> Result<usize> {
            field(i)?.parse().map_err(|_| Error::Input(format!("bad integer in column {i}")))
        };
        let (cid, sid) = (num(0)?, num(1)?);
        let tag = SplitTag::parse(field(2)?).ok_or_else(|| Error::Input("bad split tag".into()))?;
        let (h, w) = (num(3)?, num(4)?);
        let p = h * w;
        if rec.len() != 5 + 2 * p {
            return input(format!("row for sample {sid} has {} columns, expected {}", rec.len(), 5 + 2 * p));
        }
        let img = (0..p)
            .map(|j| field(5 + j)?.parse::<f64>().map_err(|_| Error::Input("bad intensity".into())))
            .collect::<Result<Vec<_>>>()?;
        let mask = (0..p)
            .map(|j| match field(5 + p + j)? {
                "0" => Ok(0u8),
                "1" => Ok(1u8),
                _ => Err(Error::Input("mask bits must be 0 or 1".into())),
            })
            .collect::<Result<Vec<_>>>()?;
        while clients.len() <= cid {
            let id = clients.len();
            clients.push(ClientDataset {
                client_id: id,
                height: h,
                width: w,
                images: vec![],
                masks: vec![],
                split: Split { train: vec![], val: vec![], test: vec![] },
            });
        }
        let c = &mut clients[cid];
        if sid != c.images.len() {
            return input(format!("client {cid}: samples must be listed in order"));
        }
        if (c.height, c.width) != (h, w) {
            return input(format!("client {cid}: inconsistent image size"));
        }
        match tag {
            SplitTag::Train => c.split.train.push(sid),
            SplitTag::Val => c.split.val.push(sid),
            SplitTag::Test => c.split.test.push(sid),
        }
        c.images.push(img);
        c.masks.push(mask);
    }
    if clients.is_empty() || clients.iter().any(|c| c.is_empty()) {
        return input("federation file has missing clients");
    }
    Ok(clients)
}
