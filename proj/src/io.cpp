#include "mrtrus/io.hpp"

#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "mrtrus/error.hpp"

namespace mrtrus {

namespace fs = std::filesystem;

std::string format_real(double v) { return fmt::format("{:.17g}", v); }

LineReader::LineReader(std::string_view text) : text_(text) {}

bool LineReader::advance() {
  while (pos_ < text_.size()) {
    const std::size_t end = text_.find('\n', pos_);
    const std::size_t stop = end == std::string_view::npos ? text_.size() : end;
    std::string_view line = text_.substr(pos_, stop - pos_);
    pos_ = end == std::string_view::npos ? text_.size() : end + 1;
    ++line_;
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ' || line.back() == '\t')) line.remove_suffix(1);
    std::size_t first = line.find_first_not_of(" \t");
    if (first == std::string_view::npos) continue;
    current_ = line.substr(first);
    return true;
  }
  return false;
}

bool LineReader::at_end() {
  if (pending_) return false;
  pending_ = advance();
  return !pending_;
}

std::string_view LineReader::raw_line(std::string_view what) {
  if (!pending_ && !advance()) throw ParseError(line_ + 1, fmt::format("unexpected end of input, expected {}", what));
  pending_ = false;
  return current_;
}

std::vector<std::string_view> LineReader::tokens(std::string_view what) {
  const std::string_view line = raw_line(what);
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t') ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

void LineReader::expect_exact(std::string_view expected) {
  const std::string_view got = raw_line(expected);
  if (got != expected) fail(fmt::format("expected '{}', got '{}'", expected, got));
}

void LineReader::fail(const std::string& message) const { throw ParseError(line_, message); }

int LineReader::to_int(std::string_view s) const {
  int v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) fail(fmt::format("'{}' is not an integer", s));
  return v;
}

double LineReader::to_real(std::string_view s) const {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) fail(fmt::format("'{}' is not a number", s));
  if (!std::isfinite(v)) fail(fmt::format("'{}' is not finite", s));
  return v;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::InvalidInput, fmt::format("cannot open '{}'", path.string()));
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, std::string_view bytes) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::InvalidInput, fmt::format("cannot write '{}'", path.string()));
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorKind::InvalidInput, fmt::format("write to '{}' failed", path.string()));
}

// ---- contour stacks --------------------------------------------------------

namespace {

void append_slice(std::string& out, const PlanarContour& c) {
  out += fmt::format("SLICE {} {} {}\n", c.slice_index, format_real(c.z), c.points.size());
  for (const auto& p : c.points) out += fmt::format("{} {}\n", format_real(p.x()), format_real(p.y()));
}

PlanarContour read_slice(LineReader& reader, const std::vector<std::string_view>& head) {
  if (head.size() != 4 || head[0] != "SLICE") reader.fail("expected 'SLICE <index> <z_mm> <n>'");
  PlanarContour c;
  c.slice_index = reader.to_int(head[1]);
  c.z = reader.to_real(head[2]);
  const int n = reader.to_int(head[3]);
  if (n < 0) reader.fail("negative point count");
  c.points.reserve(n);
  for (int i = 0; i < n; ++i) {
    const auto xy = reader.tokens("'<x_mm> <y_mm>'");
    if (xy.size() != 2) reader.fail("expected '<x_mm> <y_mm>'");
    c.points.emplace_back(reader.to_real(xy[0]), reader.to_real(xy[1]));
  }
  return c;
}

std::string_view value_of(LineReader& reader, std::string_view key) {
  const auto tok = reader.tokens(key);
  if (tok.size() != 2 || tok[0] != key) reader.fail(fmt::format("expected '{} <value>'", key));
  return tok[1];
}

Modality modality_of(LineReader& reader, std::string_view name) {
  try {
    return parse_modality(name);
  } catch (const Error& e) {
    reader.fail(e.what());
  }
}

}  // namespace

std::string encode_contour_stack(const ContourStack& stack) {
  std::string out = "CONTOURSTACK v1\n";
  out += fmt::format("modality {}\n", modality_name(stack.modality()));
  out += fmt::format("spacing_mm {}\n", format_real(stack.spacing()));
  for (const auto& c : stack.contours()) append_slice(out, c);
  return out;
}

ContourStack decode_contour_stack(std::string_view text) {
  LineReader reader(text);
  reader.expect_exact("CONTOURSTACK v1");
  const Modality modality = modality_of(reader, value_of(reader, "modality"));
  const double spacing = reader.to_real(value_of(reader, "spacing_mm"));
  std::vector<PlanarContour> contours;
  while (!reader.at_end()) contours.push_back(read_slice(reader, reader.tokens("SLICE")));
  return ContourStack(modality, spacing, std::move(contours));
}

ContourStack read_contour_stack(const fs::path& path) { return decode_contour_stack(read_file(path)); }

void write_contour_stack(const fs::path& path, const ContourStack& stack) {
  write_file(path, encode_contour_stack(stack));
}

std::string encode_slice(const PlanarContour& c) {
  std::string out;
  append_slice(out, c);
  return out;
}

PlanarContour decode_slice(std::string_view text) {
  LineReader reader(text);
  PlanarContour c = read_slice(reader, reader.tokens("SLICE"));
  if (!reader.at_end()) reader.fail("trailing content after slice record");
  return c;
}

// ---- volumes ---------------------------------------------------------------

static_assert(std::endian::native == std::endian::little, "raw volume I/O assumes a little-endian host");

std::string encode_volume_header(const VolumeGrid& v) {
  const auto& d = v.dims();
  return fmt::format("VOLUME v1\ndims {} {} {}\nspacing_mm {} {} {}\norigin_mm {} {} {}\ndtype f32le\n", d[0], d[1],
                     d[2], format_real(v.spacing().x()), format_real(v.spacing().y()), format_real(v.spacing().z()),
                     format_real(v.origin().x()), format_real(v.origin().y()), format_real(v.origin().z()));
}

std::string encode_volume_raw(const VolumeGrid& v) {
  std::string out(v.voxels().size() * sizeof(float), '\0');
  std::memcpy(out.data(), v.voxels().data(), out.size());
  return out;
}

VolumeGrid decode_volume(std::string_view header, std::string_view raw) {
  LineReader reader(header);
  reader.expect_exact("VOLUME v1");
  auto triple = [&](std::string_view key) {
    const auto tok = reader.tokens(key);
    if (tok.size() != 4 || tok[0] != key) reader.fail(fmt::format("expected '{} <a> <b> <c>'", key));
    return tok;
  };
  const auto dt = triple("dims");
  const std::array<int, 3> dims{reader.to_int(dt[1]), reader.to_int(dt[2]), reader.to_int(dt[3])};
  for (int d : dims)
    if (d < 1) reader.fail("dims must be >= 1");
  const auto st = triple("spacing_mm");
  const Vec3 spacing(reader.to_real(st[1]), reader.to_real(st[2]), reader.to_real(st[3]));
  if ((spacing.array() <= 0.0).any()) reader.fail("spacing must be positive");
  const auto ot = triple("origin_mm");
  const Point3 origin(reader.to_real(ot[1]), reader.to_real(ot[2]), reader.to_real(ot[3]));
  if (value_of(reader, "dtype") != "f32le") reader.fail("only dtype f32le is supported");
  if (!reader.at_end()) reader.fail("unexpected content after dtype");
  const std::size_t count = static_cast<std::size_t>(dims[0]) * dims[1] * dims[2];
  if (raw.size() != count * sizeof(float))
    throw ParseError(0, fmt::format("raw data has {} bytes, header implies {}", raw.size(), count * sizeof(float)));
  std::vector<float> voxels(count);
  std::memcpy(voxels.data(), raw.data(), raw.size());
  return VolumeGrid(dims, spacing, origin, std::move(voxels));
}

fs::path raw_path_for(const fs::path& header) {
  fs::path p = header;
  p.replace_extension(".raw");
  return p;
}

VolumeGrid read_volume(const fs::path& header, const fs::path& raw) {
  return decode_volume(read_file(header), read_file(raw));
}

VolumeGrid read_volume(const fs::path& header) { return read_volume(header, raw_path_for(header)); }

void write_volume(const fs::path& header, const fs::path& raw, const VolumeGrid& volume) {
  write_file(header, encode_volume_header(volume));
  write_file(raw, encode_volume_raw(volume));
}

void write_volume(const fs::path& header, const VolumeGrid& volume) {
  write_volume(header, raw_path_for(header), volume);
}

// ---- transforms ------------------------------------------------------------

namespace {

void append_rigid(std::string& out, const RigidTransform& t) {
  const auto& q = t.rotation();
  out += "RIGID v1\n";
  out += fmt::format("q {} {} {} {}\n", format_real(q.w()), format_real(q.x()), format_real(q.y()),
                     format_real(q.z()));
  out += fmt::format("t {} {} {}\n", format_real(t.translation().x()), format_real(t.translation().y()),
                     format_real(t.translation().z()));
}

RigidTransform read_rigid(LineReader& reader) {
  const auto q = reader.tokens("q");
  if (q.size() != 5 || q[0] != "q") reader.fail("expected 'q <w> <x> <y> <z>'");
  const Eigen::Quaterniond rot(reader.to_real(q[1]), reader.to_real(q[2]), reader.to_real(q[3]),
                               reader.to_real(q[4]));
  if (std::abs(rot.norm() - 1.0) > 1e-6) reader.fail("rotation quaternion is not unit length");
  const auto t = reader.tokens("t");
  if (t.size() != 4 || t[0] != "t") reader.fail("expected 't <x> <y> <z>'");
  return {rot, Vec3(reader.to_real(t[1]), reader.to_real(t[2]), reader.to_real(t[3]))};
}

}  // namespace

std::string encode_transform(const FusionTransform& f) {
  std::string out;
  if (!f.ffd) {
    append_rigid(out, f.rigid);
    return out;
  }
  const auto& ffd = *f.ffd;
  out += "FFD v1\n";
  append_rigid(out, f.rigid);
  const Point3& lo = ffd.box_min();
  const std::string s = format_real(ffd.box_size());
  out += fmt::format("box {} {} {} {} {} {}\n", format_real(lo.x()), format_real(lo.y()), format_real(lo.z()), s, s, s);
  out += fmt::format("max_depth {}\n", ffd.max_depth());
  out += fmt::format("lambda {}\n", format_real(ffd.lambda()));
  for (const auto& rec : ffd.depth_first_records()) {
    if (!rec.leaf) {
      out += "N split\n";
      continue;
    }
    out += "N leaf\n";
    for (int i = 0; i < 8; ++i)
      out += fmt::format("c {} {} {} {}\n", i, format_real(rec.corners[i].x()), format_real(rec.corners[i].y()),
                         format_real(rec.corners[i].z()));
  }
  return out;
}

FusionTransform decode_transform(std::string_view text) {
  LineReader reader(text);
  const std::string_view magic = reader.raw_line("RIGID v1 or FFD v1");
  FusionTransform f;
  if (magic == "RIGID v1") {
    f.rigid = read_rigid(reader);
  } else if (magic == "FFD v1") {
    reader.expect_exact("RIGID v1");
    f.rigid = read_rigid(reader);
    const auto box = reader.tokens("box");
    if (box.size() != 7 || box[0] != "box") reader.fail("expected 'box <x0> <y0> <z0> <sx> <sy> <sz>'");
    const Point3 lo(reader.to_real(box[1]), reader.to_real(box[2]), reader.to_real(box[3]));
    const double size = reader.to_real(box[4]);
    if (reader.to_real(box[5]) != size || reader.to_real(box[6]) != size) reader.fail("FFD box must be a cube");
    if (!(size > 0.0)) reader.fail("FFD box size must be positive");
    const int max_depth = reader.to_int(value_of(reader, "max_depth"));
    const double lambda = reader.to_real(value_of(reader, "lambda"));
    std::vector<OctreeSplineFFD::CellRecord> records;
    while (!reader.at_end()) {
      const auto n = reader.tokens("N");
      if (n.size() != 2 || n[0] != "N" || (n[1] != "leaf" && n[1] != "split")) reader.fail("expected 'N leaf|split'");
      OctreeSplineFFD::CellRecord rec;
      rec.leaf = n[1] == "leaf";
      if (rec.leaf) {
        for (int i = 0; i < 8; ++i) {
          const auto c = reader.tokens("c");
          if (c.size() != 5 || c[0] != "c" || reader.to_int(c[1]) != i)
            reader.fail(fmt::format("expected 'c {} <dx> <dy> <dz>'", i));
          rec.corners[i] = Vec3(reader.to_real(c[2]), reader.to_real(c[3]), reader.to_real(c[4]));
        }
      }
      records.push_back(rec);
    }
    try {
      f.ffd = OctreeSplineFFD::from_records(lo, size, max_depth, lambda, records);
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::ParseError) throw;
      reader.fail(e.what());
    }
  } else {
    reader.fail(fmt::format("unknown transform magic '{}'", magic));
  }
  if (!reader.at_end()) reader.fail("trailing content");
  return f;
}

FusionTransform read_transform(const fs::path& path) { return decode_transform(read_file(path)); }

void write_transform(const fs::path& path, const FusionTransform& f) { write_file(path, encode_transform(f)); }

// ---- landmarks, seeds, DVH ---------------------------------------------------

std::string encode_landmarks(const LandmarkSeries& series) {
  std::string out = fmt::format("LANDMARKS v1\nmodality {}\n", modality_name(series.modality()));
  for (const auto& e : series.entries())
    out += fmt::format("S {} {} {} {}\n", e.slice_index, format_real(e.z), format_real(e.center.x()),
                       format_real(e.center.y()));
  return out;
}

std::string encode_landmarks(Modality modality, std::span<const Point3> points) {
  std::string out = fmt::format("LANDMARKS v1\nmodality {}\n", modality_name(modality));
  for (const auto& p : points)
    out += fmt::format("P {} {} {}\n", format_real(p.x()), format_real(p.y()), format_real(p.z()));
  return out;
}

LandmarkFile decode_landmarks(std::string_view text) {
  LineReader reader(text);
  reader.expect_exact("LANDMARKS v1");
  LandmarkFile file;
  file.modality = modality_of(reader, value_of(reader, "modality"));
  std::vector<SliceLandmark> entries;
  while (!reader.at_end()) {
    const auto tok = reader.tokens("landmark");
    if (tok.size() == 5 && tok[0] == "S") {
      entries.push_back({reader.to_int(tok[1]), reader.to_real(tok[2]),
                         Point2(reader.to_real(tok[3]), reader.to_real(tok[4]))});
    } else if (tok.size() == 4 && tok[0] == "P") {
      file.points.emplace_back(reader.to_real(tok[1]), reader.to_real(tok[2]), reader.to_real(tok[3]));
    } else {
      reader.fail("expected 'S <index> <z> <x> <y>' or 'P <x> <y> <z>'");
    }
    if (!entries.empty() && !file.points.empty()) reader.fail("landmark file mixes S and P records");
  }
  try {
    file.series = LandmarkSeries(file.modality, std::move(entries));
  } catch (const Error& e) {
    reader.fail(e.what());
  }
  return file;
}

LandmarkFile read_landmarks(const fs::path& path) { return decode_landmarks(read_file(path)); }

std::string encode_seeds(const SeedImplant& implant) {
  std::string out = "SEEDS v1\n";
  for (const auto& s : implant.seeds)
    out += fmt::format("{} {} {} {}\n", format_real(s.position.x()), format_real(s.position.y()),
                       format_real(s.position.z()), format_real(s.strength));
  return out;
}

SeedImplant decode_seeds(std::string_view text) {
  LineReader reader(text);
  reader.expect_exact("SEEDS v1");
  SeedImplant implant;
  while (!reader.at_end()) {
    const auto tok = reader.tokens("seed");
    if (tok.size() != 4) reader.fail("expected '<x> <y> <z> <strength>'");
    implant.seeds.push_back({Point3(reader.to_real(tok[0]), reader.to_real(tok[1]), reader.to_real(tok[2])),
                             reader.to_real(tok[3])});
    if (!(implant.seeds.back().strength > 0.0)) reader.fail("seed strength must be positive");
  }
  return implant;
}

SeedImplant read_seeds(const fs::path& path) { return decode_seeds(read_file(path)); }

std::string encode_dvh_csv(const DVHCurve& curve) {
  std::string out = "dose_gy,fraction\n";
  for (std::size_t i = 0; i < curve.dose_bins.size(); ++i)
    out += fmt::format("{},{}\n", format_real(curve.dose_bins[i]), format_real(curve.cumulative_fraction[i]));
  return out;
}

DVHCurve decode_dvh_csv(std::string_view text) {
  LineReader reader(text);
  reader.expect_exact("dose_gy,fraction");
  DVHCurve curve;
  while (!reader.at_end()) {
    const std::string_view line = reader.raw_line("row");
    const std::size_t comma = line.find(',');
    if (comma == std::string_view::npos) reader.fail("expected '<dose_gy>,<fraction>'");
    curve.dose_bins.push_back(reader.to_real(line.substr(0, comma)));
    curve.cumulative_fraction.push_back(reader.to_real(line.substr(comma + 1)));
  }
  try {
    curve.validate();
  } catch (const Error& e) {
    reader.fail(e.what());
  }
  return curve;
}

// ---- sessions and key=value ----------------------------------------------------

std::vector<std::pair<std::string, std::string>> parse_key_values(std::string_view text) {
  std::vector<std::pair<std::string, std::string>> out;
  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t end = text.find('\n', pos);
    std::string_view line = text.substr(pos, end == std::string_view::npos ? std::string_view::npos : end - pos);
    pos = end == std::string_view::npos ? text.size() + 1 : end + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    auto trim = [](std::string_view s) {
      const auto b = s.find_first_not_of(" \t\r");
      if (b == std::string_view::npos) return std::string_view{};
      return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
    };
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ParseError(line_no, fmt::format("expected key=value, got '{}'", line));
    const std::string_view key = trim(line.substr(0, eq));
    if (key.empty()) throw ParseError(line_no, "empty key");
    out.emplace_back(std::string(key), std::string(trim(line.substr(eq + 1))));
  }
  return out;
}

void SessionFile::check_files() const {
  auto need = [](const fs::path& p, std::string_view what) {
    if (p.empty()) throw Error(ErrorKind::InvalidInput, fmt::format("session is missing '{}'", what));
    if (!fs::exists(p)) throw Error(ErrorKind::InvalidInput, fmt::format("{} file '{}' not found", what, p.string()));
  };
  auto optional = [&](const fs::path& p, std::string_view what) {
    if (!p.empty()) need(p, what);
  };
  need(trus, "trus");
  need(mri_transverse, "mri_transverse");
  need(mri_sagittal, "mri_sagittal");
  need(mri_coronal, "mri_coronal");
  need(volume, "volume");
  need(raw_path_for(volume), "volume raw");
  optional(trus_landmarks, "trus_landmarks");
  optional(mri_landmarks, "mri_landmarks");
  optional(seeds, "seeds");
  if (mode != "rigid" && mode != "elastic")
    throw Error(ErrorKind::InvalidInput, fmt::format("unknown registration mode '{}'", mode));
}

std::string encode_session(const SessionFile& s) {
  std::string out = "SESSION v1\n";
  auto put = [&](std::string_view key, const fs::path& p) {
    if (!p.empty()) out += fmt::format("{} {}\n", key, p.generic_string());
  };
  put("trus", s.trus);
  put("mri_transverse", s.mri_transverse);
  put("mri_sagittal", s.mri_sagittal);
  put("mri_coronal", s.mri_coronal);
  put("volume", s.volume);
  put("trus_landmarks", s.trus_landmarks);
  put("mri_landmarks", s.mri_landmarks);
  put("seeds", s.seeds);
  out += fmt::format("mode {}\n", s.mode);
  for (const auto& [k, v] : s.config) out += fmt::format("config {}={}\n", k, v);
  put("output_dir", s.output_dir);
  return out;
}

SessionFile decode_session(std::string_view text, const fs::path& base_dir) {
  LineReader reader(text);
  reader.expect_exact("SESSION v1");
  SessionFile s;
  auto resolve = [&](std::string_view v) {
    fs::path p{std::string(v)};
    return p.is_absolute() ? p : base_dir / p;
  };
  while (!reader.at_end()) {
    const std::string_view line = reader.raw_line("session entry");
    const std::size_t sp = line.find_first_of(" \t");
    if (sp == std::string_view::npos) reader.fail(fmt::format("expected '<key> <value>', got '{}'", line));
    const std::string_view key = line.substr(0, sp);
    const std::string_view value = line.substr(line.find_first_not_of(" \t", sp));
    if (key == "trus") s.trus = resolve(value);
    else if (key == "mri_transverse") s.mri_transverse = resolve(value);
    else if (key == "mri_sagittal") s.mri_sagittal = resolve(value);
    else if (key == "mri_coronal") s.mri_coronal = resolve(value);
    else if (key == "volume") s.volume = resolve(value);
    else if (key == "trus_landmarks") s.trus_landmarks = resolve(value);
    else if (key == "mri_landmarks") s.mri_landmarks = resolve(value);
    else if (key == "seeds") s.seeds = resolve(value);
    else if (key == "output_dir") s.output_dir = resolve(value);
    else if (key == "mode") s.mode = std::string(value);
    else if (key == "config") {
      const auto kv = parse_key_values(value);
      if (kv.size() != 1) reader.fail("expected 'config <key>=<value>'");
      s.config.push_back(kv.front());
    } else {
      reader.fail(fmt::format("unknown session key '{}'", key));
    }
  }
  return s;
}

}  // namespace mrtrus
