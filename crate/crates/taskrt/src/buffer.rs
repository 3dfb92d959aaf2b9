//! Backing storage and the strided block views handed to kernels.

use std::cell::UnsafeCell;
use std::marker::PhantomData;

/// One backing allocation of f64 scalars. Several handles may describe
/// (possibly overlapping) windows into the same region; the engine's
/// dependency protocol guarantees that no two kernels ever hold conflicting
/// views concurrently, which is what makes the interior mutability sound.
pub(crate) struct Region {
    cells: UnsafeCell<Box<[f64]>>,
    len: usize,
}

// Access is serialized by the engine's dependency graph, never by the type
// system; see the module comment.
unsafe impl Sync for Region {}
unsafe impl Send for Region {}

impl Region {
    pub(crate) fn new(len: usize) -> Self {
        Self {
            cells: UnsafeCell::new(vec![0.0; len].into_boxed_slice()),
            len,
        }
    }

    pub(crate) fn len(&self) -> usize {
        self.len
    }

    /// Raw base pointer. Callers must respect the dependency protocol.
    pub(crate) fn base(&self) -> *mut f64 {
        unsafe { (*self.cells.get()).as_mut_ptr() }
    }
}

/// Layout of a handle inside its region: `rows` x `cols` items, each item
/// `item` consecutive scalars, with `ld` items between consecutive rows.
/// A contiguous vector is one row with `ld == cols`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BlockDesc {
    /// Scalar offset of item (0, 0) within the region.
    pub offset: usize,
    pub rows: usize,
    pub cols: usize,
    /// Leading dimension, in items.
    pub ld: usize,
    /// Scalars per item.
    pub item: usize,
}

impl BlockDesc {
    /// A dense vector of `items` items.
    pub fn vector(items: usize, item: usize) -> Self {
        Self {
            offset: 0,
            rows: 1,
            cols: items,
            ld: items,
            item,
        }
    }

    /// A dense `cols` x `rows` grid (row-major, x fastest).
    pub fn grid(cols: usize, rows: usize, item: usize) -> Self {
        Self {
            offset: 0,
            rows,
            cols,
            ld: cols,
            item,
        }
    }

    /// Number of scalars addressed by the view (not counting ld gaps).
    pub fn scalars(&self) -> usize {
        self.rows * self.cols * self.item
    }

    pub fn byte_size(&self) -> usize {
        self.scalars() * std::mem::size_of::<f64>()
    }

    /// One past the last scalar this view can touch, for bounds validation.
    pub(crate) fn span_end(&self) -> usize {
        if self.rows == 0 || self.cols == 0 || self.item == 0 {
            return self.offset;
        }
        self.offset + (self.rows - 1) * self.ld * self.item + self.cols * self.item
    }
}

/// Read-only view of a block, valid for one kernel invocation.
pub struct Block<'a> {
    base: *const f64,
    desc: BlockDesc,
    _marker: PhantomData<&'a f64>,
}

impl<'a> Block<'a> {
    /// Safety: `base` must point at `desc.offset` scalars before a live
    /// allocation covering `desc.span_end()` scalars, with no concurrent
    /// writer for the lifetime `'a`.
    pub(crate) unsafe fn from_raw(base: *const f64, desc: BlockDesc) -> Self {
        Self {
            base: base.add(desc.offset),
            desc,
            _marker: PhantomData,
        }
    }

    pub fn cols(&self) -> usize {
        self.desc.cols
    }

    pub fn rows(&self) -> usize {
        self.desc.rows
    }

    pub fn item_len(&self) -> usize {
        self.desc.item
    }

    pub fn ld(&self) -> usize {
        self.desc.ld
    }

    /// Item at column `i`, row `j`.
    #[inline]
    pub fn item(&self, i: usize, j: usize) -> &'a [f64] {
        debug_assert!(i < self.desc.cols && j < self.desc.rows);
        unsafe {
            std::slice::from_raw_parts(
                self.base.add((j * self.desc.ld + i) * self.desc.item),
                self.desc.item,
            )
        }
    }

    /// Base pointer of item (0, 0) plus the layout, for adapters that build
    /// their own accessor over the same window.
    pub fn as_raw(&self) -> (*const f64, BlockDesc) {
        (self.base, self.desc)
    }
}

/// Mutable view of a block, valid for one kernel invocation.
pub struct BlockMut<'a> {
    base: *mut f64,
    desc: BlockDesc,
    _marker: PhantomData<&'a mut f64>,
}

impl<'a> BlockMut<'a> {
    /// Safety: as for [`Block::from_raw`], and additionally no concurrent
    /// reader or writer of the window for `'a`.
    pub(crate) unsafe fn from_raw(base: *mut f64, desc: BlockDesc) -> Self {
        Self {
            base: base.add(desc.offset),
            desc,
            _marker: PhantomData,
        }
    }

    pub fn cols(&self) -> usize {
        self.desc.cols
    }

    pub fn rows(&self) -> usize {
        self.desc.rows
    }

    pub fn item_len(&self) -> usize {
        self.desc.item
    }

    pub fn ld(&self) -> usize {
        self.desc.ld
    }

    #[inline]
    pub fn item(&self, i: usize, j: usize) -> &[f64] {
        debug_assert!(i < self.desc.cols && j < self.desc.rows);
        unsafe {
            std::slice::from_raw_parts(
                self.base.add((j * self.desc.ld + i) * self.desc.item),
                self.desc.item,
            )
        }
    }

    #[inline]
    pub fn item_mut(&mut self, i: usize, j: usize) -> &mut [f64] {
        debug_assert!(i < self.desc.cols && j < self.desc.rows);
        unsafe {
            std::slice::from_raw_parts_mut(
                self.base.add((j * self.desc.ld + i) * self.desc.item),
                self.desc.item,
            )
        }
    }

    pub fn fill(&mut self, value: f64) {
        for j in 0..self.desc.rows {
            for i in 0..self.desc.cols {
                self.item_mut(i, j).fill(value);
            }
        }
    }

    pub fn as_raw_mut(&mut self) -> (*mut f64, BlockDesc) {
        (self.base, self.desc)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vector_desc_addresses_all_items() {
        let d = BlockDesc::vector(5, 3);
        assert_eq!(d.scalars(), 15);
        assert_eq!(d.byte_size(), 120);
        assert_eq!(d.span_end(), 15);
    }

    #[test]
    fn strided_grid_span() {
        // 2x2 items of 1 scalar inside a row of ld 4, offset 2.
        let d = BlockDesc {
            offset: 2,
            rows: 2,
            cols: 2,
            ld: 4,
            item: 1,
        };
        assert_eq!(d.scalars(), 4);
        assert_eq!(d.span_end(), 2 + 4 + 2);
    }

    #[test]
    fn block_views_address_items() {
        let region = Region::new(12);
        let desc = BlockDesc::grid(2, 2, 3);
        let mut w = unsafe { BlockMut::from_raw(region.base(), desc) };
        w.item_mut(1, 0)[2] = 7.0;
        w.item_mut(0, 1)[0] = 3.0;
        let r = unsafe { Block::from_raw(region.base(), desc) };
        assert_eq!(r.item(1, 0), &[0.0, 0.0, 7.0]);
        assert_eq!(r.item(0, 1), &[3.0, 0.0, 0.0]);
    }
}
