#include "doctest.h"

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#include "btl/annotator.hpp"
#include "btl/errors.hpp"
#include "btl/format.hpp"
#include "btl/model_client.hpp"
#include "httplib.h"
#include "support/test_support.hpp"

using namespace btl;
namespace fs = std::filesystem;

namespace {

const char* kGpsInstruction = "Use the GPS to locate a nearby museum and then book a ride with Lyft";

std::vector<UiElement> home_screen() {
  return {
      {1, {40, 200, 200, 360}, "icon", "Settings", true},
      {2, {240, 200, 400, 360}, "icon", "Lyft", true},
      {3, {440, 200, 600, 360}, "icon", "Maps & Navigation", true},
      {4, {640, 200, 800, 360}, "icon", "Chrome", true},
      {5, {0, 0, 1080, 80}, "text", "10:42", false},
  };
}

AnnotationRequest request(std::vector<UiElement> elements, std::string instruction, std::size_t lambda = 5) {
  AnnotationRequest req;
  req.elements = std::move(elements);
  req.instruction = std::move(instruction);
  req.lambda = lambda;
  return req;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<Json> read_jsonl(const fs::path& p) {
  std::vector<Json> out;
  std::ifstream in(p);
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) out.push_back(Json::parse(line));
  return out;
}

std::string record_line(const std::vector<UiElement>& elements, const std::string& instruction) {
  Json els = Json::array();
  for (const auto& e : elements)
    els.push_back({{"id", e.id},
                   {"bbox", {e.bbox.x0, e.bbox.y0, e.bbox.x1, e.bbox.y1}},
                   {"type", e.elem_type},
                   {"caption", e.caption},
                   {"interactivity", e.interactivity}});
  return Json{{"elements", els}, {"instruction", instruction}, {"history", Json::array()}}.dump();
}

struct TempDir {
  fs::path path;
  TempDir() {
    static std::atomic<int> counter{0};
    path = fs::temp_directory_path() / ("btl_annotator_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

void write_lines(const fs::path& p, const std::vector<std::string>& lines) {
  std::ofstream out(p);
  for (const auto& l : lines) out << l << '\n';
}

// Serves the ranking endpoint on a free local port for the lifetime of the object.
struct FakeModelServer {
  httplib::Server server;
  std::thread thread;
  int port = 0;
  std::atomic<int> calls{0};
  std::atomic<int> failures_left{0};
  std::string last_auth;
  std::string last_body;
  std::mutex mu;

  FakeModelServer() {
    server.Post("/rank", [this](const httplib::Request& req, httplib::Response& res) {
      ++calls;
      {
        std::lock_guard lock(mu);
        last_auth = req.get_header_value("Authorization");
        last_body = req.body;
      }
      if (failures_left > 0) {
        --failures_left;
        res.status = 500;
        return;
      }
      const Json body = Json::parse(req.body);
      Json ids = Json::array();
      for (auto it = body["elements"].rbegin(); it != body["elements"].rend(); ++it) ids.push_back((*it)["id"]);
      res.set_content(Json{{"ranked_ids", ids}}.dump(), "application/json");
    });
    server.Post("/bad", [](const httplib::Request&, httplib::Response& res) {
      res.set_content(R"({"ranked_ids": [999]})", "application/json");
    });
    port = server.bind_to_any_port("127.0.0.1");
    thread = std::thread([this] { server.listen_after_bind(); });
    server.wait_until_ready();
  }
  ~FakeModelServer() {
    server.stop();
    thread.join();
  }
  std::string url(const std::string& path) const { return "http://127.0.0.1:" + std::to_string(port) + path; }
};

// A local port with nothing listening on it.
std::string dead_endpoint() {
  httplib::Server s;
  const int port = s.bind_to_any_port("127.0.0.1");
  s.stop();
  return "http://127.0.0.1:" + std::to_string(port) + "/rank";
}

}  // namespace

TEST_CASE("tokenize") {
  CHECK(tokenize("Maps & Navigation") == std::vector<std::string>{"maps", "navigation"});
  CHECK(tokenize("  94.3 FM!") == std::vector<std::string>{"94", "3", "fm"});
  CHECK(tokenize("").empty());
}

TEST_CASE("heuristic_rank examples") {
  SUBCASE("open maps") {
    const std::vector<UiElement> els = {{1, {0, 0, 10, 10}, "icon", "Maps & Navigation", false},
                                        {2, {0, 20, 10, 30}, "icon", "Lyft", false},
                                        {3, {0, 40, 10, 50}, "icon", "Settings", false}};
    const auto r = heuristic_rank(els, "open maps");
    REQUIRE(r.size() == 3);
    CHECK(r[0] == RankedElement{1, 0.5});
    CHECK(r[1].score == 0.0);
  }
  SUBCASE("empty list") { CHECK(heuristic_rank({}, "open maps").empty()); }
  SUBCASE("id tiebreak") {
    const std::vector<UiElement> els = {{7, {0, 0, 10, 10}, "button", "Send", true},
                                        {3, {0, 20, 10, 30}, "button", "Send", true}};
    const auto r = heuristic_rank(els, "tap send");
    REQUIRE(r.size() == 2);
    CHECK(r[0].id == 3);
    CHECK(r[1].id == 7);
  }
  SUBCASE("interactive bonus breaks equal overlap") {
    const std::vector<UiElement> els = {{1, {0, 0, 10, 10}, "text", "Bluetooth", false},
                                        {2, {0, 20, 10, 30}, "switch", "Bluetooth", true}};
    const auto r = heuristic_rank(els, "enable bluetooth");
    CHECK(r[0].id == 2);
    CHECK(r[0].score == doctest::Approx(0.6));
    CHECK(r[1].score == doctest::Approx(0.5));
  }
}

TEST_CASE("the GPS instruction puts Maps & Navigation first") {
  const auto r = heuristic_rank(home_screen(), kGpsInstruction);
  REQUIRE_FALSE(r.empty());
  CHECK(r[0].id == 3);
  CHECK(r[1].id == 2);

  HeuristicRanker ranker;
  const auto result = filter_rois(request(home_screen(), kGpsInstruction), ranker);
  REQUIRE_FALSE(result.roi.empty());
  CHECK(result.source_ids[0] == 3);
  CHECK(result.roi[0] == BlinkElement{1, {440, 200, 600, 360}, Caption::Dynamic});
  CHECK(result.provenance == Provenance::Heuristic);
}

TEST_CASE("filter_rois bounds, renumbering and captions") {
  HeuristicRanker ranker;
  SUBCASE("cannot exceed the element count") {
    const std::vector<UiElement> els = {{10, {0, 0, 10, 10}, "button", "send message", true},
                                        {20, {0, 20, 10, 30}, "text", "message draft", false},
                                        {30, {0, 40, 10, 50}, "button", "send", true}};
    const auto r = filter_rois(request(els, "send the message"), ranker);
    REQUIRE(r.roi.size() == 3);
    CHECK(r.source_ids == std::vector<std::int64_t>{10, 30, 20});
    for (std::size_t k = 0; k < r.roi.size(); ++k) CHECK(r.roi[k].id == static_cast<std::int64_t>(k + 1));
    CHECK(r.roi[2].caption == Caption::Static);
  }
  SUBCASE("zero relevance gives None") {
    const auto r = filter_rois(request(home_screen(), "xyzzy"), ranker);
    CHECK(r.roi.empty());
    CHECK(serialize_blink(r.roi) == "None");
  }
  SUBCASE("lambda truncates") {
    const auto r = filter_rois(request(home_screen(), kGpsInstruction, 1), ranker);
    CHECK(r.roi.size() == 1);
  }
}

TEST_CASE("annotator invariants on random screens") {
  testing::Rng rng(31);
  HeuristicRanker ranker;
  const std::vector<std::string> vocab = {"maps", "send", "message", "call", "settings", "wifi", "ride", "camera",
                                          "search", "back", "music", "open", "the", "app"};
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<UiElement> els;
    const int n = testing::uniform_int(rng, 0, 12);
    for (int i = 0; i < n; ++i) {
      std::string caption;
      for (int w = testing::uniform_int(rng, 1, 3); w > 0; --w)
        caption += vocab[testing::uniform_int(rng, 0, static_cast<int>(vocab.size()) - 1)] + " ";
      els.push_back({i * 3 + 1, testing::random_box(rng, 1000.0), "icon", caption, testing::uniform_int(rng, 0, 1) == 1});
    }
    std::string instruction;
    for (int w = testing::uniform_int(rng, 1, 5); w > 0; --w)
      instruction += vocab[testing::uniform_int(rng, 0, static_cast<int>(vocab.size()) - 1)] + " ";
    const std::size_t lambda = static_cast<std::size_t>(testing::uniform_int(rng, 1, 5));

    const auto base = filter_rois(request(els, instruction, lambda), ranker);
    CHECK(base.roi.size() <= lambda);
    for (std::size_t k = 0; k < base.roi.size(); ++k) {
      const auto it = std::find_if(els.begin(), els.end(), [&](const UiElement& e) { return e.id == base.source_ids[k]; });
      REQUIRE(it != els.end());
      CHECK(it->bbox == base.roi[k].bbox);
      CHECK(base.roi[k].caption == (it->interactivity ? Caption::Dynamic : Caption::Static));
    }

    auto shuffled = els;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    const auto again = filter_rois(request(shuffled, instruction, lambda), ranker);
    CHECK(again.roi == base.roi);
    CHECK(again.source_ids == base.source_ids);

    const std::string completion = "<blink>" + serialize_blink(base.roi) +
                                   "</blink><think>t</think><link>answer([{\"Plan\": \"p\", \"Action\": "
                                   "{\"function\": \"Back\"}}])</link>";
    CHECK(check_content(completion));
  }
}

TEST_CASE("filter_rois rejects unknown ids from a ranker") {
  struct Liar final : Ranker {
    RankingReply rank(const AnnotationRequest&) override { return {{42}, std::nullopt}; }
    Provenance provenance() const override { return Provenance::Model; }
  } liar;
  CHECK_THROWS_AS(filter_rois(request(home_screen(), "x"), liar), ModelUnavailable);
}

TEST_CASE("request_from_json") {
  const auto req = request_from_json(record_line(home_screen(), kGpsInstruction), 5);
  CHECK(req.elements.size() == 5);
  CHECK(req.elements[2].caption == "Maps & Navigation");
  CHECK(req.lambda == 5);
  CHECK_THROWS_AS(request_from_json("{", 5), ParseError);
  CHECK_THROWS_AS(request_from_json(R"({"instruction": "x"})", 5), ParseError);
  CHECK_THROWS_AS(request_from_json(R"({"elements": [], "instruction": "x", "lambda": 9})", 5), InvariantError);
  CHECK_THROWS_AS(
      request_from_json(R"({"elements": [{"id": 1, "bbox": [0, 0, 1, 1]}, {"id": 1, "bbox": [0, 0, 1, 1]}],
                            "instruction": "x"})", 5),
      InvariantError);
}

TEST_CASE("annotate_dataset with the heuristic ranker") {
  TempDir dir;
  const std::vector<std::string> lines = {record_line(home_screen(), kGpsInstruction),
                                          record_line(home_screen(), "open settings"),
                                          record_line(home_screen(), "browse with chrome")};
  write_lines(dir.path / "in.jsonl", lines);
  AnnotateConfig cfg;
  cfg.jobs = 3;
  const auto summary = annotate_dataset((dir.path / "in.jsonl").string(), (dir.path / "out.jsonl").string(), cfg);
  CHECK(summary.processed == 3);
  CHECK(summary.succeeded == 3);
  CHECK(summary.fell_back == 0);
  CHECK(summary.failed == 0);

  const auto records = read_jsonl(dir.path / "out.jsonl");
  REQUIRE(records.size() == 3);
  CHECK(records[0]["roi"][0]["source_id"] == 3);
  CHECK(records[1]["roi"][0]["source_id"] == 1);
  CHECK(records[2]["roi"][0]["source_id"] == 4);
  for (const auto& r : records) CHECK(r["provenance"] == "heuristic");
  CHECK(records[0]["instruction"] == kGpsInstruction);

  // Idempotent and independent of parallelism.
  cfg.jobs = 1;
  annotate_dataset((dir.path / "in.jsonl").string(), (dir.path / "out2.jsonl").string(), cfg);
  CHECK(read_file(dir.path / "out.jsonl") == read_file(dir.path / "out2.jsonl"));
}

TEST_CASE("annotate_dataset isolates malformed records") {
  TempDir dir;
  write_lines(dir.path / "in.jsonl", {record_line(home_screen(), "open settings"), "{not json", "",
                                      R"({"elements": [], "instruction": 5})", record_line(home_screen(), "lyft")});
  std::ostringstream log;
  AnnotateConfig cfg;
  cfg.log = &log;
  const auto summary = annotate_dataset((dir.path / "in.jsonl").string(), (dir.path / "out.jsonl").string(), cfg);
  CHECK(summary.processed == 4);
  CHECK(summary.succeeded == 2);
  CHECK(summary.failed == 2);
  CHECK(read_jsonl(dir.path / "out.jsonl").size() == 2);
  CHECK(log.str().find("line 2:") != std::string::npos);
  CHECK(log.str().find("line 4:") != std::string::npos);

  CHECK_THROWS_AS(annotate_dataset((dir.path / "missing.jsonl").string(), (dir.path / "o.jsonl").string(), cfg), Error);
}

TEST_CASE("annotate_dataset falls back when the model endpoint is down") {
  TempDir dir;
  write_lines(dir.path / "in.jsonl", {record_line(home_screen(), kGpsInstruction)});
  ModelEndpointConfig ep;
  ep.base_url = dead_endpoint();
  ep.timeout = 1.0;
  ep.max_retries = 1;
  ep.backoff = 0.01;
  ModelRanker model(ep);

  AnnotateConfig cfg;
  cfg.model = &model;
  auto summary = annotate_dataset((dir.path / "in.jsonl").string(), (dir.path / "out.jsonl").string(), cfg);
  CHECK(summary.succeeded == 1);
  CHECK(summary.fell_back == 1);
  const auto records = read_jsonl(dir.path / "out.jsonl");
  REQUIRE(records.size() == 1);
  CHECK(records[0]["provenance"] == "heuristic");

  cfg.fallback = false;
  summary = annotate_dataset((dir.path / "in.jsonl").string(), (dir.path / "out.jsonl").string(), cfg);
  CHECK(summary.failed == 1);
  CHECK(summary.succeeded == 0);
}

TEST_CASE("ModelRanker talks to a ranking server") {
  FakeModelServer server;
  ::setenv("BTL_TEST_MODEL_TOKEN", "secret-123", 1);

  ModelEndpointConfig ep;
  ep.base_url = server.url("/rank");
  ep.auth_token_env_var = "BTL_TEST_MODEL_TOKEN";
  ep.timeout = 5.0;
  ep.max_retries = 2;
  ep.backoff = 0.01;
  ModelRanker model(ep);

  SUBCASE("success") {
    const auto result = filter_rois(request(home_screen(), kGpsInstruction, 2), model);
    CHECK(result.provenance == Provenance::Model);
    CHECK(result.source_ids == std::vector<std::int64_t>{5, 4});
    REQUIRE(result.raw_model_reply);
    CHECK(*result.raw_model_reply == R"({"ranked_ids":[5,4,3,2,1]})");
    std::lock_guard lock(server.mu);
    CHECK(server.last_auth == "Bearer secret-123");
    const Json sent = Json::parse(server.last_body);
    CHECK(sent["lambda"] == 2);
    CHECK(sent["instruction"] == kGpsInstruction);
    CHECK(sent["elements"].size() == 5);
  }
  SUBCASE("retries through server errors") {
    server.failures_left = 2;
    const auto reply = model.rank(request(home_screen(), "x"));
    CHECK(reply.ranked_ids.size() == 5);
    CHECK(server.calls == 3);
  }
  SUBCASE("gives up after max_retries") {
    server.failures_left = 3;
    CHECK_THROWS_AS(model.rank(request(home_screen(), "x")), ModelUnavailable);
    CHECK(server.calls == 3);
  }
  SUBCASE("unknown ids in the reply") {
    ep.base_url = server.url("/bad");
    ModelRanker bad(ep);
    CHECK_THROWS_AS(filter_rois(request(home_screen(), "x"), bad), ModelUnavailable);
  }
  SUBCASE("4xx is not retried") {
    ep.base_url = server.url("/nowhere");
    ModelRanker missing(ep);
    CHECK_THROWS_AS(missing.rank(request(home_screen(), "x")), ModelUnavailable);
  }
  ::unsetenv("BTL_TEST_MODEL_TOKEN");
}

TEST_CASE("model protocol helpers") {
  CHECK(parse_ranking_reply(R"({"ranked_ids": [3, 1]})") == std::vector<std::int64_t>{3, 1});
  CHECK_THROWS_AS(parse_ranking_reply("[]"), ModelUnavailable);
  CHECK_THROWS_AS(parse_ranking_reply(R"({"ranked_ids": ["a"]})"), ModelUnavailable);
  CHECK_THROWS_AS(ModelRanker(ModelEndpointConfig{"https://x", "", 1, 0, 0}), ConfigError);
  CHECK_THROWS_AS(ModelRanker(ModelEndpointConfig{"http://x", "", 0, 0, 0}), ConfigError);
}
