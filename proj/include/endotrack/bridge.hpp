#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "endotrack/sim/loop.hpp"

namespace endotrack::bridge {

using nlohmann::json;

inline constexpr int kSchemaVersion = 1;
inline constexpr double kStateRate = 30.0;             ///< state frames per second of simulated time
inline constexpr std::uint32_t kMaxMessageBytes = 1 << 20;

/// Wire framing: 4-byte big-endian body length, then a UTF-8 JSON object.
std::string encode(const json& msg);

/// Incremental decoder for the framing above.
class FrameDecoder {
 public:
  void feed(const char* data, std::size_t n);
  /// Next complete body, if any. Throws ProtocolViolation on an oversized length.
  std::optional<std::string> next();

 private:
  std::string buf_;
};

/// Checks one message against the protocol schema; returns the problems found.
std::vector<std::string> schema_errors(const json& msg);

enum class SteerKind { DragTip, SetInstruction, Pause, Reset };
const char* to_string(SteerKind k);

struct SteerCommand {
  std::uint64_t seq = 0;
  SteerKind kind = SteerKind::Pause;
  tiplocate::Side side = tiplocate::Side::Left;
  double dx = 0, dy = 0;  ///< left-image pixels
  ait::InstructionRecord instruction;
  bool paused = true;
};

/// Parses a `command` message. Throws VersionMismatch or ProtocolViolation.
SteerCommand parse_command(const json& msg);
json to_json(const SteerCommand& c);

json make_ack(std::uint64_t seq, double t);
json make_error(std::optional<std::uint64_t> seq, const std::string& code, const std::string& message);

/// Simulation side of the bridge. Deterministic and free of I/O: commands go
/// in, acks/errors and 30 Hz state frames come out.
class Session {
 public:
  explicit Session(const sim::ScenarioConfig& scenario, Exec exec = Exec::Parallel);

  /// Applies one raw client message; returns the ack or error reply.
  json handle(const json& msg);
  /// Advances the session clock by `ticks` control periods and returns the
  /// state frames due. The simulation only steps while not paused.
  std::vector<json> advance(long ticks = 1);
  json state_frame();

  double time() const { return loop_.time(); }
  bool paused() const { return paused_; }

 private:
  void drag(tiplocate::Side side, double dx, double dy);

  sim::ClosedLoop loop_;
  std::optional<sim::LogRow> last_;
  std::uint64_t frame_seq_ = 0;
  std::optional<std::uint64_t> last_client_seq_;
  long clock_ = 0;   ///< session ticks, paused or not
  long frames_ = 0;
  bool paused_ = false;
  bool ended_ = false;
};

/// One line of a recorded transcript: `dir` is "in" (client to bridge) or "out".
struct TranscriptEntry {
  double t = 0;
  std::string dir;
  json msg;
};

std::vector<TranscriptEntry> read_transcript(const std::string& path);
void write_transcript(const std::string& path, const std::vector<TranscriptEntry>& entries);

/// Feeds the "in" messages of `script` to a fresh session at their times and
/// records every message exchanged, in order.
std::vector<TranscriptEntry> replay(const sim::ScenarioConfig& scenario, const std::vector<TranscriptEntry>& script,
                                    double duration);

/// Queue with a fixed capacity. `push` drops the oldest entry when full.
template <typename T>
class BoundedQueue {
 public:
  explicit BoundedQueue(std::size_t capacity) : cap_(capacity) {}

  /// Returns false when an old entry had to be dropped.
  bool push(T v) {
    std::lock_guard<std::mutex> lk(mu_);
    bool kept = true;
    if (q_.size() >= cap_) {
      q_.pop_front();
      kept = false;
    }
    q_.push_back(std::move(v));
    cv_.notify_one();
    return kept;
  }

  std::optional<T> try_pop() {
    std::lock_guard<std::mutex> lk(mu_);
    if (q_.empty()) return std::nullopt;
    T v = std::move(q_.front());
    q_.pop_front();
    return v;
  }

  template <typename Rep, typename Period>
  std::optional<T> pop_for(std::chrono::duration<Rep, Period> wait) {
    std::unique_lock<std::mutex> lk(mu_);
    if (!cv_.wait_for(lk, wait, [&] { return !q_.empty(); })) return std::nullopt;
    T v = std::move(q_.front());
    q_.pop_front();
    return v;
  }

 private:
  std::size_t cap_;
  std::mutex mu_;
  std::condition_variable cv_;
  std::deque<T> q_;
};

/// TCP server: one thread steps the session in real time, the caller's thread
/// does socket I/O. They exchange messages only through bounded queues.
class Server {
 public:
  /// Binds 127.0.0.1:`port` (0 picks a free port). Throws PortUnavailable.
  Server(const sim::ScenarioConfig& scenario, int port);
  ~Server();
  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  int port() const { return port_; }
  /// Serves clients one at a time until `stop` becomes true.
  void run(const std::atomic<bool>& stop);

 private:
  sim::ScenarioConfig scenario_;
  int listen_fd_ = -1;
  int port_ = 0;
};

}  // namespace endotrack::bridge
