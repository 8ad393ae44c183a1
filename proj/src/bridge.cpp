#include "endotrack/bridge.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cmath>
#include <cstring>
#include <fstream>
#include <set>
#include <thread>

#include "endotrack/error.hpp"

namespace endotrack::bridge {

std::string encode(const json& msg) {
  const std::string body = msg.dump();
  const auto n = static_cast<std::uint32_t>(body.size());
  std::string out(4, '\0');
  for (int i = 0; i < 4; ++i) out[i] = static_cast<char>((n >> (24 - 8 * i)) & 0xff);
  return out + body;
}

void FrameDecoder::feed(const char* data, std::size_t n) { buf_.append(data, n); }

std::optional<std::string> FrameDecoder::next() {
  if (buf_.size() < 4) return std::nullopt;
  std::uint32_t n = 0;
  for (int i = 0; i < 4; ++i) n = (n << 8) | static_cast<unsigned char>(buf_[i]);
  if (n > kMaxMessageBytes) throw Error(Errc::ProtocolViolation, "message length " + std::to_string(n) + " too large");
  if (buf_.size() < 4 + static_cast<std::size_t>(n)) return std::nullopt;
  std::string body = buf_.substr(4, n);
  buf_.erase(0, 4 + n);
  return body;
}

namespace {

using Errors = std::vector<std::string>;

const std::set<std::string> kModes{"HOLDING", "TRACKING", "FALLBACK"};
const std::set<std::string> kInstructions{"TRACK_LEFT", "TRACK_RIGHT", "TRACK_WEIGHTED", "DISABLED"};
const std::set<std::string> kSteerInstructions{"TRACK_LEFT", "TRACK_RIGHT", "TRACK_WEIGHTED", "SET_ZOOM", "DISABLE"};
const std::set<std::string> kZones{"A", "B", "C"};
const std::set<std::string> kSides{"LEFT", "RIGHT"};
const std::set<std::string> kKinds{"DRAG_TIP", "SET_INSTRUCTION", "PAUSE", "RESET"};

// Validation of one JSON object against a fixed key set.
class Check {
 public:
  Check(const json& j, std::string where, Errors& errs) : j_(j), where_(std::move(where)), errs_(errs) {
    if (!j.is_object()) fail("must be an object");
  }

  bool has(const char* key) const { return j_.is_object() && j_.contains(key); }

  void keys(std::initializer_list<const char*> required, std::initializer_list<const char*> optional = {}) {
    if (!j_.is_object()) return;
    std::set<std::string> known;
    for (const char* k : required) {
      known.insert(k);
      if (!j_.contains(k)) fail(std::string("missing key ") + k);
    }
    for (const char* k : optional) known.insert(k);
    for (const auto& [k, v] : j_.items())
      if (!known.count(k)) fail("unknown key " + k);
  }

  void number(const char* key) {
    if (has(key) && !j_[key].is_number()) fail(std::string(key) + " must be a number");
  }
  void boolean(const char* key) {
    if (has(key) && !j_[key].is_boolean()) fail(std::string(key) + " must be a boolean");
  }
  void unsigned_int(const char* key) {
    if (has(key) && !(j_[key].is_number_integer() && j_[key].get<long long>() >= 0))
      fail(std::string(key) + " must be a non-negative integer");
  }
  void one_of(const char* key, const std::set<std::string>& values) {
    if (!has(key)) return;
    if (!j_[key].is_string() || !values.count(j_[key].get<std::string>()))
      fail(std::string(key) + " has an unknown value");
  }
  void pair(const char* key) {
    if (!has(key)) return;
    const json& v = j_[key];
    if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number())
      fail(std::string(key) + " must be two numbers");
  }
  void zones(const char* key) {
    if (!has(key)) return;
    Check z(j_[key], where_ + "." + key, errs_);
    z.keys({"image", "depth"});
    z.one_of("image", kZones);
    z.one_of("depth", kZones);
  }
  void fail(const std::string& what) { errs_.push_back(where_ + ": " + what); }

 private:
  const json& j_;
  std::string where_;
  Errors& errs_;
};

void check_state(const json& m, Errors& errs) {
  Check c(m, "state", errs);
  c.keys({"type", "schema", "seq", "t", "mode", "instruction", "w_d", "z_star", "paused", "camera", "tips", "target",
          "overlay"});
  c.unsigned_int("seq");
  c.number("t");
  c.one_of("mode", kModes);
  c.one_of("instruction", kInstructions);
  c.number("w_d");
  c.number("z_star");
  c.boolean("paused");
  if (c.has("camera")) {
    Check cam(m["camera"], "state.camera", errs);
    cam.keys({"theta1", "theta2", "l", "roll"});
    for (const char* k : {"theta1", "theta2", "l", "roll"}) cam.number(k);
  }
  if (c.has("tips")) {
    if (!m["tips"].is_array()) c.fail("tips must be an array");
    else
      for (std::size_t i = 0; i < m["tips"].size(); ++i) {
        Check t(m["tips"][i], "state.tips[" + std::to_string(i) + "]", errs);
        t.keys({"side", "pixel", "depth", "visible", "zones"});
        t.one_of("side", kSides);
        t.pair("pixel");
        t.number("depth");
        t.boolean("visible");
        t.zones("zones");
      }
  }
  if (c.has("target") && !m["target"].is_null()) {
    Check t(m["target"], "state.target", errs);
    t.keys({"pixel", "depth", "zones"});
    t.pair("pixel");
    t.number("depth");
    t.zones("zones");
  }
  if (c.has("overlay")) {
    Check o(m["overlay"], "state.overlay", errs);
    o.keys({"center", "radius", "zone_a", "zone_b", "width", "height"});
    o.pair("center");
    for (const char* k : {"radius", "zone_a", "zone_b"}) o.number(k);
    o.unsigned_int("width");
    o.unsigned_int("height");
  }
}

void check_command(const json& m, Errors& errs) {
  Check c(m, "command", errs);
  c.unsigned_int("seq");
  c.one_of("kind", kKinds);
  const std::string kind = m.is_object() && m.contains("kind") && m["kind"].is_string() ? m["kind"].get<std::string>() : "";
  if (kind == "DRAG_TIP") {
    c.keys({"type", "schema", "seq", "kind", "side", "dx", "dy"});
    c.one_of("side", kSides);
    c.number("dx");
    c.number("dy");
  } else if (kind == "SET_INSTRUCTION") {
    c.keys({"type", "schema", "seq", "kind", "instruction"}, {"value"});
    c.one_of("instruction", kSteerInstructions);
    c.number("value");
  } else if (kind == "PAUSE") {
    c.keys({"type", "schema", "seq", "kind", "paused"});
    c.boolean("paused");
  } else {
    c.keys({"type", "schema", "seq", "kind"});
  }
}

void check_ack(const json& m, Errors& errs) {
  Check c(m, "ack", errs);
  c.keys({"type", "schema", "seq", "t"});
  c.unsigned_int("seq");
  c.number("t");
}

void check_error(const json& m, Errors& errs) {
  Check c(m, "error", errs);
  c.keys({"type", "schema", "seq", "code", "message"});
  if (c.has("seq") && !m["seq"].is_null() && !m["seq"].is_number_unsigned()) c.fail("seq must be an integer or null");
  if (c.has("code") && !m["code"].is_string()) c.fail("code must be a string");
  if (c.has("message") && !m["message"].is_string()) c.fail("message must be a string");
}

json zones_json(const ait::ZonePair& z) { return {{"image", ait::to_string(z.image)}, {"depth", ait::to_string(z.depth)}}; }

json pixel_json(const Vec2& p) { return json::array({p.x(), p.y()}); }

}  // namespace

std::vector<std::string> schema_errors(const json& msg) {
  Errors errs;
  if (!msg.is_object()) return {"message must be an object"};
  if (!msg.contains("type") || !msg["type"].is_string()) return {"message needs a string type"};
  if (!msg.contains("schema") || !msg["schema"].is_number_integer()) return {"message needs an integer schema"};
  if (msg["schema"].get<int>() != kSchemaVersion)
    return {"schema version " + std::to_string(msg["schema"].get<int>()) + ", expected " +
            std::to_string(kSchemaVersion)};
  const std::string type = msg["type"];
  if (type == "state") check_state(msg, errs);
  else if (type == "command") check_command(msg, errs);
  else if (type == "ack") check_ack(msg, errs);
  else if (type == "error") check_error(msg, errs);
  else errs.push_back("unknown message type " + type);
  return errs;
}

const char* to_string(SteerKind k) {
  switch (k) {
    case SteerKind::DragTip: return "DRAG_TIP";
    case SteerKind::SetInstruction: return "SET_INSTRUCTION";
    case SteerKind::Pause: return "PAUSE";
    case SteerKind::Reset: return "RESET";
  }
  return "?";
}

SteerCommand parse_command(const json& msg) {
  if (msg.is_object() && msg.contains("schema") && msg["schema"].is_number_integer() &&
      msg["schema"].get<int>() != kSchemaVersion)
    throw Error(Errc::VersionMismatch, "schema version " + std::to_string(msg["schema"].get<int>()) + ", expected " +
                                           std::to_string(kSchemaVersion));
  const auto errs = schema_errors(msg);
  if (!errs.empty()) throw Error(Errc::ProtocolViolation, errs.front());
  if (msg["type"] != "command") throw Error(Errc::ProtocolViolation, "expected a command, got " + msg["type"].get<std::string>());
  SteerCommand c;
  c.seq = msg["seq"].get<std::uint64_t>();
  const std::string kind = msg["kind"];
  if (kind == "DRAG_TIP") {
    c.kind = SteerKind::DragTip;
    c.side = msg["side"] == "LEFT" ? tiplocate::Side::Left : tiplocate::Side::Right;
    c.dx = msg["dx"];
    c.dy = msg["dy"];
  } else if (kind == "SET_INSTRUCTION") {
    c.kind = SteerKind::SetInstruction;
    c.instruction.kind = ait::instruction_kind_from_string(msg["instruction"]);
    if (msg.contains("value")) c.instruction.value = msg["value"];
    else if (c.instruction.kind == ait::InstructionKind::SetZoom)
      throw Error(Errc::ProtocolViolation, "SET_ZOOM needs a value");
  } else if (kind == "PAUSE") {
    c.kind = SteerKind::Pause;
    c.paused = msg["paused"];
  } else {
    c.kind = SteerKind::Reset;
  }
  return c;
}

json to_json(const SteerCommand& c) {
  json j{{"type", "command"}, {"schema", kSchemaVersion}, {"seq", c.seq}, {"kind", to_string(c.kind)}};
  switch (c.kind) {
    case SteerKind::DragTip:
      j["side"] = tiplocate::to_string(c.side);
      j["dx"] = c.dx;
      j["dy"] = c.dy;
      break;
    case SteerKind::SetInstruction:
      j["instruction"] = ait::to_string(c.instruction.kind);
      if (c.instruction.kind == ait::InstructionKind::SetZoom || c.instruction.kind == ait::InstructionKind::TrackWeighted)
        j["value"] = c.instruction.value;
      break;
    case SteerKind::Pause:
      j["paused"] = c.paused;
      break;
    case SteerKind::Reset:
      break;
  }
  return j;
}

json make_ack(std::uint64_t seq, double t) {
  return {{"type", "ack"}, {"schema", kSchemaVersion}, {"seq", seq}, {"t", t}};
}

json make_error(std::optional<std::uint64_t> seq, const std::string& code, const std::string& message) {
  json j{{"type", "error"}, {"schema", kSchemaVersion}, {"code", code}, {"message", message}};
  j["seq"] = seq ? json(*seq) : json(nullptr);
  return j;
}

Session::Session(const sim::ScenarioConfig& scenario, Exec exec) : loop_(scenario, exec) {
  loop_.set_scripted(false);
}

json Session::handle(const json& msg) {
  std::optional<std::uint64_t> seq;
  if (msg.is_object() && msg.contains("seq") && msg["seq"].is_number_unsigned()) seq = msg["seq"].get<std::uint64_t>();
  try {
    const SteerCommand c = parse_command(msg);
    if (last_client_seq_ && c.seq <= *last_client_seq_)
      throw Error(Errc::ProtocolViolation, "sequence number " + std::to_string(c.seq) + " does not increase");
    last_client_seq_ = c.seq;
    switch (c.kind) {
      case SteerKind::DragTip: drag(c.side, c.dx, c.dy); break;
      case SteerKind::SetInstruction: loop_.apply(c.instruction); break;
      case SteerKind::Pause: paused_ = c.paused; break;
      case SteerKind::Reset: loop_.apply({ait::InstructionKind::ResetFromFallback, 0.0}); break;
    }
    return make_ack(c.seq, loop_.time());
  } catch (const Error& e) {
    std::string what = e.what();
    const std::string prefix = std::string(to_string(e.code())) + ": ";
    if (what.rfind(prefix, 0) == 0) what = what.substr(prefix.size());
    return make_error(seq, to_string(e.code()), what);
  }
}

void Session::drag(tiplocate::Side side, double dx, double dy) {
  for (auto& ins : loop_.scene().instruments) {
    if (ins.side != side) continue;
    const auto& in = loop_.config().model.intrinsics;
    const geom::RigidTransform cam = loop_.camera();
    const Vec3 p = cam.inverse() * ins.tracked_point();
    if (!(p.z() > 0)) throw Error(Errc::ProtocolViolation, "the " + std::string(tiplocate::to_string(side)) + " tip is behind the camera");
    const Vec3 delta(dx * p.z() / in.fx, dy * p.z() / in.fy, 0.0);
    ins.tip += cam.rotation * delta;
    return;
  }
  throw Error(Errc::ProtocolViolation, "no " + std::string(tiplocate::to_string(side)) + " instrument in the scene");
}

std::vector<json> Session::advance(long ticks) {
  std::vector<json> frames;
  const double rate = loop_.config().control_rate;
  for (long i = 0; i < ticks; ++i) {
    if (!paused_ && !ended_) {
      auto row = loop_.step();
      if (row) last_ = std::move(row);
      else ended_ = true;
    }
    ++clock_;
    if (clock_ > std::lround(frames_ * rate / kStateRate)) {
      frames.push_back(state_frame());
      ++frames_;
    }
  }
  return frames;
}

json Session::state_frame() {
  const auto& cfg = loop_.config();
  const auto& in = cfg.model.intrinsics;
  const auto& st = loop_.ait_state();
  const geom::RigidTransform inv = loop_.camera().inverse();
  const geom::JointState joints = geom::joints_from_pose(loop_.pose());
  json j{{"type", "state"},
         {"schema", kSchemaVersion},
         {"seq", frame_seq_++},
         {"t", last_ ? last_->t : 0.0},
         {"mode", ait::to_string(st.mode)},
         {"instruction", ait::to_string(st.instruction)},
         {"w_d", st.w_d},
         {"z_star", st.z_star},
         {"paused", paused_},
         {"camera",
          {{"theta1", joints.theta1}, {"theta2", joints.theta2}, {"l", joints.l}, {"roll", geom::roll_deviation(loop_.pose())}}}};
  j["tips"] = json::array();
  for (const auto& ins : loop_.scene().instruments) {
    const Vec3 p = inv * ins.tracked_point();
    const bool front = p.z() > 0;
    const Vec2 px = front ? in.project(p) : Vec2(in.cx, in.cy);
    const bool visible = front && (px - in.content_center()).norm() <= in.content_radius();
    j["tips"].push_back({{"side", tiplocate::to_string(ins.side)},
                         {"pixel", pixel_json(px)},
                         {"depth", p.z()},
                         {"visible", visible},
                         {"zones", zones_json(ait::classify_zone(p, in, cfg.ait, st.z_star))}});
  }
  if (last_ && last_->est_target && last_->est_zones) {
    const Vec3& s = *last_->est_target;
    const Vec2 px = s.z() > 0 ? in.project(s) : Vec2(in.cx, in.cy);
    j["target"] = {{"pixel", pixel_json(px)}, {"depth", s.z()}, {"zones", zones_json(*last_->est_zones)}};
  } else {
    j["target"] = nullptr;
  }
  j["overlay"] = {{"center", pixel_json(in.content_center())},
                  {"radius", in.content_radius()},
                  {"zone_a", cfg.ait.zone_a},
                  {"zone_b", cfg.ait.zone_a + cfg.ait.zone_b},
                  {"width", in.width},
                  {"height", in.height}};
  return j;
}

std::vector<TranscriptEntry> read_transcript(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::Io, "cannot read " + path);
  std::vector<TranscriptEntry> out;
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    try {
      const json j = json::parse(line);
      out.push_back({j.at("t").get<double>(), j.at("dir").get<std::string>(), j.at("msg")});
    } catch (const json::exception& e) {
      throw Error(Errc::ProtocolViolation, path + ":" + std::to_string(n) + ": " + e.what());
    }
  }
  return out;
}

void write_transcript(const std::string& path, const std::vector<TranscriptEntry>& entries) {
  std::ofstream out(path);
  if (!out) throw Error(Errc::Io, "cannot write " + path);
  for (const auto& e : entries) out << json{{"t", e.t}, {"dir", e.dir}, {"msg", e.msg}}.dump() << '\n';
}

std::vector<TranscriptEntry> replay(const sim::ScenarioConfig& scenario, const std::vector<TranscriptEntry>& script,
                                    double duration) {
  Session s(scenario, Exec::Serial);
  std::vector<TranscriptEntry> out;
  const double dt = 1.0 / scenario.control_rate;
  const long ticks = std::lround(duration * scenario.control_rate);
  std::size_t next = 0;
  for (long k = 0; k < ticks; ++k) {
    const double now = k * dt;
    for (; next < script.size() && script[next].t <= now + 1e-9; ++next) {
      if (script[next].dir != "in") continue;
      out.push_back({now, "in", script[next].msg});
      out.push_back({now, "out", s.handle(script[next].msg)});
    }
    for (auto& f : s.advance(1)) out.push_back({now, "out", std::move(f)});
  }
  return out;
}

namespace {

class Socket {
 public:
  explicit Socket(int fd) : fd_(fd) {}
  ~Socket() {
    if (fd_ >= 0) ::close(fd_);
  }
  int fd() const { return fd_; }

  bool send_all(const std::string& data) {
    std::size_t off = 0;
    while (off < data.size()) {
      const ssize_t n = ::send(fd_, data.data() + off, data.size() - off, MSG_NOSIGNAL);
      if (n < 0 && errno == EINTR) continue;
      if (n <= 0) return false;
      off += static_cast<std::size_t>(n);
    }
    return true;
  }

 private:
  int fd_;
};

void serve_client(const sim::ScenarioConfig& scenario, int fd, const std::atomic<bool>& stop) {
  Socket sock(fd);
  BoundedQueue<json> inbox(64), outbox(256);
  std::atomic<bool> done{false};
  std::thread sim([&] {
    Session session(scenario);
    const auto period = std::chrono::duration<double>(1.0 / scenario.control_rate);
    auto next = std::chrono::steady_clock::now();
    while (!done) {
      while (auto msg = inbox.try_pop()) outbox.push(session.handle(*msg));
      for (auto& f : session.advance(1)) outbox.push(std::move(f));
      next += std::chrono::duration_cast<std::chrono::steady_clock::duration>(period);
      std::this_thread::sleep_until(next);
    }
  });

  FrameDecoder dec;
  char buf[4096];
  while (!stop && !done) {
    pollfd p{fd, POLLIN, 0};
    const int r = ::poll(&p, 1, 5);
    if (r > 0 && (p.revents & (POLLIN | POLLHUP | POLLERR))) {
      const ssize_t n = ::recv(fd, buf, sizeof buf, 0);
      if (n <= 0) break;
      dec.feed(buf, static_cast<std::size_t>(n));
      try {
        while (auto body = dec.next()) {
          json msg;
          try {
            msg = json::parse(*body);
          } catch (const json::exception& e) {
            outbox.push(make_error(std::nullopt, "ProtocolViolation", std::string("malformed JSON: ") + e.what()));
            continue;
          }
          if (!inbox.push(std::move(msg)))
            outbox.push(make_error(std::nullopt, "ProtocolViolation", "command queue full, oldest command dropped"));
        }
      } catch (const Error& e) {
        sock.send_all(encode(make_error(std::nullopt, to_string(e.code()), e.what())));
        break;
      }
    }
    bool ok = true;
    while (auto out = outbox.try_pop())
      if (!(ok = sock.send_all(encode(*out)))) break;
    if (!ok) break;
  }
  done = true;
  sim.join();
}

}  // namespace

Server::Server(const sim::ScenarioConfig& scenario, int port) : scenario_(scenario) {
  scenario_.validate();
  listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (listen_fd_ < 0) throw Error(Errc::PortUnavailable, std::strerror(errno));
  const int one = 1;
  ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  addr.sin_port = htons(static_cast<std::uint16_t>(port));
  if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) < 0 || ::listen(listen_fd_, 1) < 0) {
    const std::string why = std::strerror(errno);
    ::close(listen_fd_);
    throw Error(Errc::PortUnavailable, "port " + std::to_string(port) + ": " + why);
  }
  socklen_t len = sizeof addr;
  ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
  port_ = ntohs(addr.sin_port);
}

Server::~Server() {
  if (listen_fd_ >= 0) ::close(listen_fd_);
}

void Server::run(const std::atomic<bool>& stop) {
  while (!stop) {
    pollfd p{listen_fd_, POLLIN, 0};
    if (::poll(&p, 1, 50) <= 0) continue;
    const int fd = ::accept(listen_fd_, nullptr, nullptr);
    if (fd < 0) continue;
    serve_client(scenario_, fd, stop);
  }
}

}  // namespace endotrack::bridge
