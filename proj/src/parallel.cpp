#include "mitu/parallel.hpp"

#include <atomic>
#include <condition_variable>
#include <cstdlib>
#include <mutex>
#include <thread>
#include <vector>

namespace mitu {
namespace {

thread_local bool in_parallel = false;

int resolve_thread_count() {
  if (const char* env = std::getenv("MITU_THREADS")) {
    const int n = std::atoi(env);
    if (n >= 1) return n;
  }
  const unsigned hc = std::thread::hardware_concurrency();
  return hc == 0 ? 1 : int(hc);
}

class Pool {
 public:
  Pool() : size_(resolve_thread_count()) {
    for (int i = 1; i < size_; ++i) workers_.emplace_back([this, i] { worker(i); });
  }

  ~Pool() {
    {
      std::lock_guard<std::mutex> lk(m_);
      stop_ = true;
    }
    cv_.notify_all();
    for (auto& t : workers_) t.join();
  }

  int size() const { return size_; }

  void run(int64_t n, const std::function<void(int64_t, int64_t)>& fn) {
    const int chunks = int(std::min<int64_t>(size_, n));
    if (chunks <= 1) {
      fn(0, n);
      return;
    }
    {
      std::lock_guard<std::mutex> lk(m_);
      job_ = &fn;
      job_n_ = n;
      job_chunks_ = chunks;
      next_chunk_.store(0, std::memory_order_relaxed);
      pending_.store(chunks, std::memory_order_relaxed);
      ++generation_;
    }
    cv_.notify_all();
    work_chunks();  // caller participates
    std::unique_lock<std::mutex> lk(m_);
    done_cv_.wait(lk, [this] { return pending_.load(std::memory_order_acquire) == 0; });
    job_ = nullptr;
  }

 private:
  void work_chunks() {
    const int64_t n = job_n_;
    const int chunks = job_chunks_;
    const int64_t per = (n + chunks - 1) / chunks;
    for (;;) {
      const int c = next_chunk_.fetch_add(1, std::memory_order_relaxed);
      if (c >= chunks) break;
      const int64_t b = int64_t(c) * per;
      const int64_t e = std::min<int64_t>(n, b + per);
      if (b < e) {
        const bool prev = in_parallel;
        in_parallel = true;
        (*job_)(b, e);
        in_parallel = prev;
      }
      if (pending_.fetch_sub(1, std::memory_order_acq_rel) == 1) {
        std::lock_guard<std::mutex> lk(m_);
        done_cv_.notify_all();
      }
    }
  }

  void worker(int) {
    uint64_t seen = 0;
    for (;;) {
      {
        std::unique_lock<std::mutex> lk(m_);
        cv_.wait(lk, [&] { return stop_ || generation_ != seen; });
        if (stop_) return;
        seen = generation_;
      }
      work_chunks();
    }
  }

  const int size_;
  std::vector<std::thread> workers_;
  std::mutex m_;
  std::condition_variable cv_, done_cv_;
  const std::function<void(int64_t, int64_t)>* job_ = nullptr;
  int64_t job_n_ = 0;
  int job_chunks_ = 0;
  std::atomic<int> next_chunk_{0};
  std::atomic<int> pending_{0};
  uint64_t generation_ = 0;
  bool stop_ = false;
};

Pool& pool() {
  static Pool p;
  return p;
}

}  // namespace

int thread_count() { return pool().size(); }

void parallel_for(int64_t n, const std::function<void(int64_t, int64_t)>& fn) {
  if (n <= 0) return;
  if (in_parallel || pool().size() == 1 || n == 1) {
    fn(0, n);
    return;
  }
  in_parallel = true;
  pool().run(n, fn);
  in_parallel = false;
}

}  // namespace mitu
