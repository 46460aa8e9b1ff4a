//! Page image loading and saving.

use std::path::{Path, PathBuf};
use std::process::Command;

use aibat_core::PageImage;

use crate::ocr::shell_quote;

#[derive(Debug, thiserror::Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Fs {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Image { path: PathBuf, message: String },
    #[error("no page-<index>.png files in {0}")]
    NoPages(PathBuf),
    #[error("rasterizer failed: {0}")]
    Rasterizer(String),
}

pub const DEFAULT_DPI: u32 = 300;

pub fn load_png(path: &Path, page_index: u32, source_id: &str) -> Result<PageImage, IoError> {
    let img = image::open(path)
        .map_err(|e| IoError::Image {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?
        .into_luma8();
    let (w, h) = img.dimensions();
    PageImage::new(page_index, w, h, img.into_raw(), source_id).map_err(|e| IoError::Image {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

pub fn save_png(path: &Path, width: u32, height: u32, gray: &[u8]) -> Result<(), IoError> {
    let buf = image::GrayImage::from_raw(width, height, gray.to_vec()).ok_or_else(|| IoError::Image {
        path: path.to_path_buf(),
        message: "pixel buffer does not match dimensions".into(),
    })?;
    buf.save_with_format(path, image::ImageFormat::Png)
        .map_err(|e| IoError::Image {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
}

pub fn save_page(path: &Path, page: &PageImage) -> Result<(), IoError> {
    save_png(path, page.width, page.height, &page.pixels)
}

/// PNG encoding of a page, as `save_page` would write it.
pub fn encode_png(page: &PageImage) -> Result<Vec<u8>, IoError> {
    let err = |message: String| IoError::Image {
        path: PathBuf::from(format!("page-{}.png", page.page_index)),
        message,
    };
    let buf = image::GrayImage::from_raw(page.width, page.height, page.pixels.clone())
        .ok_or_else(|| err("pixel buffer does not match dimensions".into()))?;
    let mut out = std::io::Cursor::new(Vec::new());
    buf.write_to(&mut out, image::ImageFormat::Png).map_err(|e| err(e.to_string()))?;
    Ok(out.into_inner())
}

fn page_index_of(path: &Path) -> Option<u32> {
    let name = path.file_name()?.to_str()?;
    name.strip_prefix("page-")?.strip_suffix(".png")?.parse().ok()
}

/// Loads every `page-<index>.png` in `dir`, ordered by index. The index in
/// the file name becomes the page index.
pub fn load_page_dir(dir: &Path, source_id: &str) -> Result<Vec<PageImage>, IoError> {
    let fs_err = |source| IoError::Fs {
        path: dir.to_path_buf(),
        source,
    };
    let mut found = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(fs_err)? {
        let path = entry.map_err(fs_err)?.path();
        if let Some(idx) = page_index_of(&path) {
            found.push((idx, path));
        }
    }
    if found.is_empty() {
        return Err(IoError::NoPages(dir.to_path_buf()));
    }
    found.sort();
    found
        .into_iter()
        .map(|(idx, path)| load_png(&path, idx, source_id))
        .collect()
}

/// Runs an external rasterizer on a PDF. The template's `{input}`, `{dpi}`
/// and `{outdir}` placeholders are substituted; the command must leave
/// `page-<index>.png` files in `outdir`.
pub fn rasterize_pdf(
    pdf: &Path,
    template: &str,
    dpi: u32,
    outdir: &Path,
    source_id: &str,
) -> Result<Vec<PageImage>, IoError> {
    std::fs::create_dir_all(outdir).map_err(|source| IoError::Fs {
        path: outdir.to_path_buf(),
        source,
    })?;
    let cmd = template
        .replace("{input}", &shell_quote(&pdf.to_string_lossy()))
        .replace("{dpi}", &dpi.to_string())
        .replace("{outdir}", &shell_quote(&outdir.to_string_lossy()));
    let out = Command::new("sh")
        .arg("-c")
        .arg(&cmd)
        .output()
        .map_err(|e| IoError::Rasterizer(format!("{cmd}: {e}")))?;
    if !out.status.success() {
        return Err(IoError::Rasterizer(format!(
            "{cmd}: {}; {}",
            out.status,
            String::from_utf8_lossy(&out.stderr).trim()
        )));
    }
    load_page_dir(outdir, source_id)
}
