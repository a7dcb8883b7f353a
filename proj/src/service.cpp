#include "mrtrus/service.hpp"

#include <charconv>
#include <chrono>
#include <random>
#include <thread>
#include <vector>

#include <fmt/format.h>
#include <httplib.h>

#include "mrtrus/error.hpp"
#include "mrtrus/io.hpp"

namespace mrtrus {

namespace {

constexpr int kSliceSlack = 10;

struct JournalEntry {
  std::string timestamp;
  std::string op;
  int slice = 0;
  std::size_t points = 0;
  bool reregistered = false;
};

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count();
  const std::time_t secs = static_cast<std::time_t>(ms / 1000);
  std::tm tm{};
  gmtime_r(&secs, &tm);
  return fmt::format("{:04}-{:02}-{:02}T{:02}:{:02}:{:02}.{:03}Z", tm.tm_year + 1900, tm.tm_mon + 1, tm.tm_mday,
                     tm.tm_hour, tm.tm_min, tm.tm_sec, ms % 1000);
}

std::string new_token() {
  static std::mutex m;
  static std::mt19937_64 rng{std::random_device{}()};
  std::lock_guard lock(m);
  return fmt::format("{:016x}{:016x}", rng(), rng());
}

int parse_int(std::string_view s, std::string_view what) {
  int v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size())
    throw Error(ErrorKind::InvalidInput, fmt::format("{} '{}' is not an integer", what, s));
  return v;
}

double parse_double(std::string_view s, std::string_view what) {
  double v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size())
    throw Error(ErrorKind::InvalidInput, fmt::format("{} '{}' is not a number", what, s));
  return v;
}

CrossPosition parse_cross(std::string_view s) {
  const auto comma = s.find(',');
  if (comma == std::string_view::npos) throw Error(ErrorKind::InvalidInput, fmt::format("cross '{}' must be cx,cy", s));
  return {parse_int(s.substr(0, comma), "cross x"), parse_int(s.substr(comma + 1), "cross y")};
}

}  // namespace

struct FusionService::Session {
  PipelineConfig config;
  ContourStack original_trus{Modality::Trus, 1.0, {}};
  std::vector<ContourStack> mri;
  std::shared_ptr<const VolumeGrid> volume;
  std::optional<LandmarkSeries> trus_landmarks;
  std::vector<Point3> mri_landmarks;
  std::optional<SeedImplant> seeds;
  RegistrationMode mode = RegistrationMode::Elastic;
  int min_slice = 0;
  int max_slice = 0;

  // mutable state, guarded by data_mutex
  ContourStack trus{Modality::Trus, 1.0, {}};
  std::shared_ptr<const RegistrationRun> registration;
  std::vector<JournalEntry> journal;
  std::map<std::string, std::string> cache;

  mutable std::shared_mutex data_mutex;
  std::mutex cache_mutex;
  std::mutex mutation_mutex;

  void check_slice(int k) const {
    if (k < min_slice - kSliceSlack || k > max_slice + kSliceSlack)
      throw NotFound(fmt::format("slice {} outside [{}, {}]", k, min_slice - kSliceSlack, max_slice + kSliceSlack));
  }

  std::optional<std::string> cached(const std::string& key) {
    std::lock_guard lock(cache_mutex);
    if (auto it = cache.find(key); it != cache.end()) return it->second;
    return std::nullopt;
  }
  void store(const std::string& key, const std::string& value) {
    std::lock_guard lock(cache_mutex);
    cache[key] = value;
  }
};

FusionService::FusionService(std::filesystem::path data_dir, PipelineConfig defaults)
    : data_dir_(std::move(data_dir)), defaults_(std::move(defaults)) {
  defaults_.validate();
}

FusionService::~FusionService() = default;

std::shared_ptr<FusionService::Session> FusionService::find(const std::string& id) const {
  std::shared_lock lock(sessions_mutex_);
  const auto it = sessions_.find(id);
  if (it == sessions_.end()) throw NotFound(fmt::format("unknown session '{}'", id));
  return it->second;
}

std::string FusionService::create_session(std::string_view session_text) {
  const SessionFile file = decode_session(session_text, data_dir_);
  file.check_files();
  auto s = std::make_shared<Session>();
  s->config = apply_overrides(defaults_, file.config);
  s->mode = parse_registration_mode(file.mode);
  s->original_trus = read_contour_stack(file.trus);
  if (s->original_trus.modality() != Modality::Trus)
    throw Error(ErrorKind::InvalidInput, "session 'trus' stack is not a TRUS stack");
  if (s->original_trus.empty()) throw Error(ErrorKind::EmptyInput, "TRUS stack has no slices");
  s->trus = s->original_trus;
  s->min_slice = s->original_trus.contours().front().slice_index;
  s->max_slice = s->original_trus.contours().back().slice_index;
  for (const auto& p : {file.mri_transverse, file.mri_sagittal, file.mri_coronal}) s->mri.push_back(read_contour_stack(p));
  s->volume = std::make_shared<const VolumeGrid>(read_volume(file.volume));
  if (!file.trus_landmarks.empty()) s->trus_landmarks = read_landmarks(file.trus_landmarks).series;
  if (!file.mri_landmarks.empty()) s->mri_landmarks = read_landmarks(file.mri_landmarks).points;
  if (!file.seeds.empty()) s->seeds = read_seeds(file.seeds);
  s->registration = std::make_shared<const RegistrationRun>(
      run_registration(s->trus, s->mri, s->config, RegistrationMode::Elastic));
  std::string id = new_token();
  std::unique_lock lock(sessions_mutex_);
  sessions_.emplace(id, std::move(s));
  return id;
}

std::string FusionService::composite(const std::string& id, int slice, std::optional<CrossPosition> cross,
                                     RegistrationMode mode) {
  auto s = find(id);
  s->check_slice(slice);
  std::shared_lock lock(s->data_mutex);
  const PlaneSpec plane = plane_for(s->original_trus, slice, s->config);
  const CrossPosition c = cross.value_or(default_cross(plane));
  const std::string key = fmt::format("composite/{}/{}/{}/{}", slice, c.cx, c.cy, registration_mode_name(mode));
  if (auto hit = s->cached(key)) return *hit;
  const Image2D img = render_composite(*s->volume, s->original_trus, s->trus, s->registration->transform(mode), slice,
                                       c, s->config);
  std::string bytes = encode_pgm(img);
  s->store(key, bytes);
  return bytes;
}

std::string FusionService::overlay(const std::string& id, int slice, RegistrationMode mode) {
  auto s = find(id);
  s->check_slice(slice);
  std::shared_lock lock(s->data_mutex);
  const std::string key = fmt::format("overlay/{}/{}", slice, registration_mode_name(mode));
  if (auto hit = s->cached(key)) return *hit;
  std::string text =
      encode_overlay(render_overlay(s->mri, s->original_trus, s->registration->transform(mode), slice, s->config));
  s->store(key, text);
  return text;
}

std::string FusionService::put_contour(const std::string& id, int slice, std::string_view body, bool reregister) {
  auto s = find(id);
  std::unique_lock mutation(s->mutation_mutex, std::try_to_lock);
  if (!mutation.owns_lock()) throw Conflict(fmt::format("session '{}' has a mutation in flight", id));
  s->check_slice(slice);

  ContourStack current = [&] {
    std::shared_lock lock(s->data_mutex);
    return s->trus;
  }();
  JournalEntry entry;
  entry.slice = slice;
  const bool erase = body.find_first_not_of(" \t\r\n") == std::string_view::npos;
  std::optional<ContourStack> next;
  if (erase) {
    entry.op = "delete";
    next = current.without_slice(slice);
  } else {
    PlanarContour c = decode_slice(body);
    if (c.slice_index != slice)
      throw Error(ErrorKind::InvalidInput, fmt::format("SLICE record index {} does not match route slice {}",
                                                       c.slice_index, slice));
    const double expected = s->original_trus.z_of(slice);
    if (std::abs(c.z - expected) > ContourStack::kSpacingTolerance)
      throw Error(ErrorKind::SpacingMismatch,
                  fmt::format("slice {} must sit at z = {} mm, got {}", slice, format_real(expected), format_real(c.z)));
    entry.op = current.find(slice) ? "replace" : "create";
    entry.points = c.points.size();
    next = current.with_contour(std::move(c));
  }
  const VolumeComparison cmp = compare_volumes(s->original_trus, *next, s->config.volume_formula);
  std::shared_ptr<const RegistrationRun> run;
  if (reregister) {
    run = std::make_shared<const RegistrationRun>(run_registration(*next, s->mri, s->config, RegistrationMode::Elastic));
    entry.reregistered = true;
  }
  entry.timestamp = utc_timestamp();
  {
    std::unique_lock lock(s->data_mutex);
    s->trus = std::move(*next);
    if (run) s->registration = std::move(run);
    s->journal.push_back(std::move(entry));
    std::lock_guard cache_lock(s->cache_mutex);
    s->cache.clear();
  }
  Report r;
  r.kind = "contour_edit";
  r.add("volume_cc", cmp.after_cc);
  r.add("volume_original_cc", cmp.before_cc);
  r.add("delta_cc", cmp.delta_cc);
  r.add("delta_pct", cmp.delta_pct);
  r.add("slice_count_delta_apex", std::to_string(cmp.slices.apex));
  r.add("slice_count_delta_base", std::to_string(cmp.slices.base));
  return encode_report(r);
}

std::string FusionService::metrics(const std::string& id) {
  auto s = find(id);
  std::shared_lock lock(s->data_mutex);
  if (auto hit = s->cached("metrics")) return *hit;
  const RegistrationRun& run = *s->registration;
  Report r = registration_report(run, s->config);
  r.kind = "metrics";
  if (s->trus_landmarks && !s->mri_landmarks.empty()) {
    try {
      const UrethraResult u =
          urethra_distance(*s->trus_landmarks, s->mri_landmarks, run.final_transform(), s->config.match_tolerance);
      const Report ur = urethra_report(u);
      for (const auto& f : ur.fields) r.fields.push_back(f);
      for (const auto& t : ur.tables) r.tables.push_back(t);
    } catch (const Error& e) {
      r.add("urethra_error", std::string(e.name()));
    }
  }
  std::string text = encode_report(r);
  s->store("metrics", text);
  return text;
}

std::string FusionService::dvh(const std::string& id, double pitch, std::string_view bins) {
  auto s = find(id);
  std::shared_lock lock(s->data_mutex);
  if (!s->seeds) throw Error(ErrorKind::InvalidInput, "session has no seed file");
  const std::string key = fmt::format("dvh/{}/{}", format_real(pitch), bins);
  if (auto hit = s->cached(key)) return *hit;
  const auto grid = parse_bins(bins);
  std::string csv = encode_dvh_csv(compute_dvh(*s->seeds, s->trus, s->config.kernel, grid, pitch));
  s->store(key, csv);
  return csv;
}

std::string FusionService::journal(const std::string& id) {
  auto s = find(id);
  std::shared_lock lock(s->data_mutex);
  std::string out = "JOURNAL v1\n";
  for (std::size_t i = 0; i < s->journal.size(); ++i) {
    const auto& e = s->journal[i];
    out += fmt::format("{} {} {} {} {} {}\n", i + 1, e.timestamp, e.op, e.slice, e.points, e.reregistered ? 1 : 0);
  }
  return out;
}

std::unique_lock<std::mutex> FusionService::hold_mutation_lock(const std::string& id) {
  return std::unique_lock(find(id)->mutation_mutex);
}

ServiceResponse FusionService::handle(const ServiceRequest& req) {
  auto error = [](int status, std::string_view name, std::string_view message) {
    return ServiceResponse{status, "text/plain", fmt::format("error: {}\n{}\n", name, message)};
  };
  try {
    std::vector<std::string_view> parts;
    std::string_view path = req.path;
    while (!path.empty()) {
      if (path.front() == '/') {
        path.remove_prefix(1);
        continue;
      }
      const auto slash = path.find('/');
      parts.push_back(path.substr(0, slash));
      if (slash == std::string_view::npos) break;
      path.remove_prefix(slash);
    }
    auto query = [&](const std::string& key) -> std::optional<std::string> {
      if (auto it = req.query.find(key); it != req.query.end()) return it->second;
      return std::nullopt;
    };
    auto mode = [&] { return parse_registration_mode(query("mode").value_or("elastic")); };
    if (parts.empty() || parts[0] != "sessions") throw NotFound(fmt::format("no route for {}", req.path));
    if (parts.size() == 1 && req.method == "POST") return {200, "text/plain", fmt::format("id: {}\n", create_session(req.body))};
    if (parts.size() < 2) throw NotFound(fmt::format("no route for {} {}", req.method, req.path));
    const std::string id(parts[1]);
    if (parts.size() == 5 && parts[2] == "slices" && req.method == "GET") {
      const int k = parse_int(parts[3], "slice");
      if (parts[4] == "composite") {
        std::optional<CrossPosition> cross;
        if (auto c = query("cross")) cross = parse_cross(*c);
        return {200, "image/x-portable-graymap", composite(id, k, cross, mode())};
      }
      if (parts[4] == "overlay") return {200, "text/plain", overlay(id, k, mode())};
    }
    if (parts.size() == 4 && parts[2] == "contours" && req.method == "PUT") {
      const bool rereg = query("reregister").value_or("0") == "1";
      return {200, "text/plain", put_contour(id, parse_int(parts[3], "slice"), req.body, rereg)};
    }
    if (parts.size() == 3 && req.method == "GET") {
      if (parts[2] == "metrics") return {200, "text/plain", metrics(id)};
      if (parts[2] == "journal") return {200, "text/plain", journal(id)};
      if (parts[2] == "dvh") {
        const double pitch = parse_double(query("pitch").value_or("1"), "pitch");
        return {200, "text/csv", dvh(id, pitch, query("bins").value_or("0:300:1"))};
      }
    }
    throw NotFound(fmt::format("no route for {} {}", req.method, req.path));
  } catch (const NotFound& e) {
    return error(404, "NotFound", e.what());
  } catch (const Conflict& e) {
    return error(409, "Conflict", e.what());
  } catch (const Error& e) {
    return error(422, e.name(), e.what());
  } catch (const std::exception& e) {
    return error(500, "Internal", e.what());
  }
}

struct HttpServer::Impl {
  FusionService& service;
  httplib::Server server;
  std::thread thread;

  explicit Impl(FusionService& s) : service(s) {
    auto forward = [this](const httplib::Request& in, httplib::Response& out) {
      ServiceRequest req{in.method, in.path, {}, in.body};
      for (const auto& [k, v] : in.params) req.query[k] = v;
      const ServiceResponse res = service.handle(req);
      out.status = res.status;
      out.set_content(res.body, res.content_type);
    };
    server.Get(".*", forward);
    server.Post(".*", forward);
    server.Put(".*", forward);
  }
};

HttpServer::HttpServer(FusionService& service) : impl_(std::make_unique<Impl>(service)) {}

HttpServer::~HttpServer() { stop(); }

int HttpServer::start(const std::string& host, int port) {
  const int bound = port == 0 ? impl_->server.bind_to_any_port(host) : (impl_->server.bind_to_port(host, port) ? port : -1);
  if (bound < 0) throw Error(ErrorKind::InvalidConfig, fmt::format("cannot bind {}:{}", host, port));
  impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
  return bound;
}

void HttpServer::run(const std::string& host, int port) {
  if (!impl_->server.listen(host, port)) throw Error(ErrorKind::InvalidConfig, fmt::format("cannot serve on {}:{}", host, port));
}

void HttpServer::stop() {
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

}  // namespace mrtrus
