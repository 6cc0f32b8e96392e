//! Asynchronous training-data loader: one background producer decodes
//! examples in exact schedule order into a bounded queue (depth two
//! batches). A performance device only — fetches that match the schedule
//! pop from the queue, anything else decodes directly, so results are
//! identical with prefetching on or off.

use std::sync::mpsc::{sync_channel, Receiver};
use std::sync::Arc;
use std::thread::JoinHandle;

use deskret_core::data::TrainExample;
use deskret_core::trainer::{epoch_schedule, ExampleSource, TrainConfig};
use deskret_core::CoreError;

use crate::store::{fetch_train, TokenStore};

type Slot = (usize, Result<TrainExample, CoreError>);

pub struct PrefetchSource {
    store: Arc<TokenStore>,
    rx: Option<Receiver<Slot>>,
    peeked: Option<Slot>,
    handle: Option<JoinHandle<()>>,
}

impl PrefetchSource {
    /// Spawn the producer for the exact fetch sequence `train` will issue
    /// under `cfg`: per epoch, the shuffled schedule truncated to whole
    /// batches.
    pub fn new(store: Arc<TokenStore>, cfg: &TrainConfig) -> Self {
        let (tx, rx) = sync_channel::<Slot>(2 * cfg.batch_size.max(1));
        let producer_store = Arc::clone(&store);
        let (seed, epochs, batch) = (cfg.seed, cfg.epochs, cfg.batch_size.max(1));
        let handle = std::thread::spawn(move || {
            let len = producer_store.len();
            for epoch in 0..epochs {
                let order = epoch_schedule(seed, epoch as u64, len);
                for chunk in order.chunks_exact(batch) {
                    for &i in chunk {
                        let item = (i, fetch_train(&producer_store, i));
                        if tx.send(item).is_err() {
                            return; // consumer gone
                        }
                    }
                }
            }
        });
        PrefetchSource { store, rx: Some(rx), peeked: None, handle: Some(handle) }
    }
}

impl ExampleSource for PrefetchSource {
    fn len(&self) -> usize {
        self.store.len()
    }

    fn fetch(&mut self, index: usize) -> Result<TrainExample, CoreError> {
        if let Some((i, _)) = &self.peeked {
            if *i == index {
                let (_, item) = self.peeked.take().expect("peeked");
                return item;
            }
            // Off-schedule fetch (e.g. positive padding): leave the queue
            // untouched and decode directly.
            return fetch_train(&self.store, index);
        }
        if let Some(rx) = &self.rx {
            match rx.recv() {
                Ok((i, item)) if i == index => return item,
                Ok(slot) => {
                    self.peeked = Some(slot);
                    return fetch_train(&self.store, index);
                }
                Err(_) => {} // producer finished; fall through
            }
        }
        fetch_train(&self.store, index)
    }
}

impl Drop for PrefetchSource {
    fn drop(&mut self) {
        // Closing the receiver unblocks the producer's send.
        self.rx.take();
        if let Some(handle) = self.handle.take() {
            let _ = handle.join();
        }
    }
}
