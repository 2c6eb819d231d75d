#include "wtcvae/synth/service.hpp"

#include <algorithm>
#include <atomic>
#include <csignal>
#include <deque>
#include <functional>

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>
#include <boost/lockfree/spsc_queue.hpp>

#include "wtcvae/wav.hpp"

namespace wtcvae::synth {

namespace asio = boost::asio;
namespace beast = boost::beast;
namespace websocket = beast::websocket;
using tcp = asio::ip::tcp;

namespace {

class Session;

}  // namespace

struct SynthService::Impl {
  ServiceConfig config;
  TableLibrary library;
  std::unique_ptr<Generator> pending_generator;
  std::unique_ptr<Engine> engine;
  std::unique_ptr<Regenerator> regen;

  asio::io_context io{1};
  std::optional<asio::executor_work_guard<asio::io_context::executor_type>> work;
  tcp::acceptor acceptor{io};
  asio::signal_set signals{io};
  std::vector<std::weak_ptr<Session>> sessions;  // io thread only
  std::shared_ptr<const std::string> last_update;   // io thread only

  boost::lockfree::spsc_queue<float> audio;
  std::atomic<bool> stopping{false};
  std::atomic<bool> render_done{false};
  std::atomic<std::uint64_t> frames_rendered{0}, frames_written{0}, frames_dropped{0};
  std::uint64_t regenerations = 0;  // final count once the worker is gone

  std::mutex stop_mu;
  std::condition_variable stop_cv;
  bool stop_requested = false;
  bool started = false;
  bool finished = false;

  std::thread io_thread, render_thread, writer_thread;

  explicit Impl(ServiceConfig c, std::unique_ptr<Generator> g, TableLibrary lib)
      : config(std::move(c)),
        library(std::move(lib)),
        pending_generator(std::move(g)),
        audio(static_cast<std::size_t>(config.engine.sample_rate) * 2) {}

  void request_stop() {
    {
      std::lock_guard lock(stop_mu);
      stop_requested = true;
    }
    stop_cv.notify_all();
  }

  void do_accept();
  void handle(Session& s, const std::string& text);
  void broadcast(std::shared_ptr<const std::string> msg);
  void render_loop();
  void writer_loop();
  void shutdown();
};

namespace {

class Session : public std::enable_shared_from_this<Session> {
 public:
  Session(tcp::socket socket, SynthService::Impl& svc) : ws_(std::move(socket)), svc_(svc) {}

  void run() {
    ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
    ws_.read_message_max(1 << 20);
    ws_.async_accept([self = shared_from_this()](beast::error_code ec) { self->on_accept(ec); });
  }

  void send(std::shared_ptr<const std::string> msg) {
    if (closing_) return;
    queue_.push_back(std::move(msg));
    if (queue_.size() == 1) do_write();
  }

  void send_error(const std::string& what) {
    send(std::make_shared<const std::string>(protocol::serialize(protocol::ServerMessage{protocol::ErrorReply{what}})));
  }

  // Only once the io thread has exited.
  void abort() {
    beast::error_code ec;
    beast::get_lowest_layer(ws_).socket().close(ec);
  }

  void close() {
    if (closing_ || !open_) return;
    closing_ = true;
    ws_.async_close(websocket::close_code::going_away, [self = shared_from_this()](beast::error_code) {});
  }

 private:
  void on_accept(beast::error_code ec) {
    if (ec) return;
    open_ = true;
    svc_.sessions.push_back(weak_from_this());
    if (svc_.last_update) send(svc_.last_update);
    do_read();
  }

  void do_read() {
    ws_.async_read(buf_, [self = shared_from_this()](beast::error_code ec, std::size_t) { self->on_read(ec); });
  }

  void on_read(beast::error_code ec) {
    if (ec) {
      open_ = false;
      return;
    }
    if (!ws_.got_text()) {
      send_error("binary frames are not supported");
    } else {
      svc_.handle(*this, beast::buffers_to_string(buf_.data()));
    }
    buf_.consume(buf_.size());
    do_read();
  }

  void do_write() {
    ws_.text(true);
    ws_.async_write(asio::buffer(*queue_.front()), [self = shared_from_this()](beast::error_code ec, std::size_t) {
      if (ec) {
        self->queue_.clear();
        return;
      }
      self->queue_.pop_front();
      if (!self->queue_.empty()) self->do_write();
    });
  }

  websocket::stream<beast::tcp_stream> ws_;
  beast::flat_buffer buf_;
  std::deque<std::shared_ptr<const std::string>> queue_;
  SynthService::Impl& svc_;
  bool open_ = false;
  bool closing_ = false;
};

}  // namespace

void SynthService::Impl::do_accept() {
  acceptor.async_accept([this](beast::error_code ec, tcp::socket socket) {
    if (ec) return;  // acceptor closed
    std::make_shared<Session>(std::move(socket), *this)->run();
    do_accept();
  });
}

void SynthService::Impl::broadcast(std::shared_ptr<const std::string> msg) {
  sessions.erase(std::remove_if(sessions.begin(), sessions.end(), [](const auto& w) { return w.expired(); }),
                 sessions.end());
  for (const auto& w : sessions) {
    if (auto s = w.lock()) s->send(msg);
  }
}

void SynthService::Impl::handle(Session& s, const std::string& text) {
  protocol::ClientMessage m;
  try {
    m = protocol::parse_client(text);
  } catch (const protocol::ProtocolError& e) {
    s.send_error(e.what());
    return;
  }
  const auto queued = [&](bool ok) {
    if (!ok) s.send_error("engine command queue full; command dropped");
  };
  std::visit(
      [&](const auto& msg) {
        using M = std::decay_t<decltype(msg)>;
        if constexpr (std::is_same_v<M, protocol::SetLabels>) {
          regen->request_labels(msg.labels);
        } else if constexpr (std::is_same_v<M, protocol::SelectTable>) {
          if (!regen->request_table(static_cast<std::size_t>(msg.id))) {
            s.send_error("no table with id " + std::to_string(msg.id));
          }
        } else if constexpr (std::is_same_v<M, protocol::NoteOn>) {
          queued(engine->note_on(msg.midi, static_cast<float>(msg.velocity)));
        } else if constexpr (std::is_same_v<M, protocol::NoteOff>) {
          queued(engine->note_off(msg.midi));
        } else if constexpr (std::is_same_v<M, protocol::SetFilter>) {
          queued(engine->set_filter(msg.cutoff_hz));
        } else {
          s.send(std::make_shared<const std::string>(protocol::serialize(protocol::ServerMessage{library.listing()})));
        }
      },
      m);
}

void SynthService::Impl::render_loop() {
  using clock = std::chrono::steady_clock;
  const double fs = config.engine.sample_rate;
  const std::uint64_t limit = config.duration_s > 0.0 ? static_cast<std::uint64_t>(std::llround(config.duration_s * fs))
                                                      : std::numeric_limits<std::uint64_t>::max();
  const bool keep = !config.render_to.empty();
  std::vector<float> buf(config.block_frames);
  auto next = clock::now();
  std::uint64_t rendered = 0;
  while (!stopping.load()) {
    const auto n = static_cast<std::size_t>(std::min<std::uint64_t>(buf.size(), limit - rendered));
    if (n == 0) {
      request_stop();
      break;
    }
    engine->render(std::span<float>(buf).first(n));
    rendered += n;
    frames_rendered.store(rendered);
    if (keep) {
      const std::size_t pushed = audio.push(buf.data(), n);
      frames_dropped.fetch_add(n - pushed);
    }
    next += std::chrono::duration_cast<clock::duration>(std::chrono::duration<double>(static_cast<double>(n) / fs));
    std::this_thread::sleep_until(next);
  }
  render_done.store(true);
}

void SynthService::Impl::writer_loop() {
  wav::StreamWriter out(config.render_to, static_cast<std::uint32_t>(config.engine.sample_rate));
  std::vector<float> chunk(4096);
  for (;;) {
    const bool last = render_done.load();
    const std::size_t n = audio.pop(chunk.data(), chunk.size());
    if (n > 0) {
      out.append(std::span<const float>(chunk).first(n));
      frames_written.fetch_add(n);
    } else if (last) {
      break;
    } else {
      std::this_thread::sleep_for(std::chrono::milliseconds(5));
    }
  }
  out.close();
}

void SynthService::Impl::shutdown() {
  if (finished) return;
  finished = true;
  stopping.store(true);
  if (render_thread.joinable()) render_thread.join();
  if (writer_thread.joinable()) writer_thread.join();
  regenerations = regen->completed();
  regen.reset();  // no more broadcasts after this
  asio::post(io, [this] {
    beast::error_code ec;
    acceptor.close(ec);
    signals.cancel(ec);
    for (const auto& w : sessions) {
      if (auto s = w.lock()) s->close();
    }
    work.reset();
  });
  // Clients get up to two seconds to acknowledge the close handshake.
  asio::steady_timer tick(io);
  const auto deadline = std::chrono::steady_clock::now() + std::chrono::seconds(2);
  std::function<void(beast::error_code)> poll = [&](beast::error_code) {
    const bool all_closed =
        std::all_of(sessions.begin(), sessions.end(), [](const auto& w) { return w.expired(); });
    if (all_closed || std::chrono::steady_clock::now() >= deadline) {
      io.stop();
      return;
    }
    tick.expires_after(std::chrono::milliseconds(10));
    tick.async_wait(poll);
  };
  asio::post(io, [&] { poll({}); });
  if (io_thread.joinable()) io_thread.join();
  for (const auto& w : sessions) {
    if (auto s = w.lock()) s->abort();
  }
  sessions.clear();
}

SynthService::SynthService(ServiceConfig config, std::unique_ptr<Generator> generator, TableLibrary library)
    : impl_(std::make_unique<Impl>(std::move(config), std::move(generator), std::move(library))) {
  Impl& s = *impl_;
  s.config.engine.validate();
  if (s.config.block_frames == 0) throw Error("service: block size must be positive");
  if (s.library.entries.empty()) throw Error("service: no tables to play");
  if (s.config.initial_table >= s.library.entries.size()) {
    throw Error("service: no table with id " + std::to_string(s.config.initial_table));
  }
  if (!s.pending_generator) throw Error("service: no generator");
}

SynthService::~SynthService() {
  if (impl_ && impl_->started) {
    stop();
    impl_->shutdown();
  }
}

unsigned short SynthService::start() {
  Impl& s = *impl_;
  if (s.started) throw Error("service already started");
  beast::error_code ec;
  const auto address = asio::ip::make_address(s.config.bind_address, ec);
  if (ec) throw Error("invalid bind address '" + s.config.bind_address + "'");
  const tcp::endpoint ep(address, s.config.port);
  s.acceptor.open(ep.protocol(), ec);
  if (!ec) s.acceptor.set_option(asio::socket_base::reuse_address(true), ec);
  if (!ec) s.acceptor.bind(ep, ec);
  if (!ec) s.acceptor.listen(asio::socket_base::max_listen_connections, ec);
  if (ec) {
    throw Error("cannot listen on " + s.config.bind_address + ":" + std::to_string(s.config.port) + ": " +
                ec.message());
  }
  const unsigned short port = s.acceptor.local_endpoint().port();

  s.engine = std::make_unique<Engine>(s.config.engine, s.library.entries[s.config.initial_table].samples);
  s.regen = std::make_unique<Regenerator>(
      *s.engine, std::move(s.pending_generator), s.library,
      [&s](const protocol::TableUpdate& u) {
        auto msg = std::make_shared<const std::string>(protocol::serialize(protocol::ServerMessage{u}));
        asio::post(s.io, [&s, msg] {
          s.last_update = msg;
          s.broadcast(msg);
        });
      },
      [&s](const std::string& what) {
        auto msg = std::make_shared<const std::string>(
            protocol::serialize(protocol::ServerMessage{protocol::ErrorReply{what}}));
        asio::post(s.io, [&s, msg] { s.broadcast(msg); });
      });

  s.work.emplace(s.io.get_executor());
  if (s.config.handle_signals) {
    s.signals.add(SIGINT);
    s.signals.add(SIGTERM);
    s.signals.async_wait([&s](beast::error_code ec, int) {
      if (!ec) s.request_stop();
    });
  }
  s.do_accept();
  s.started = true;
  s.io_thread = std::thread([&s] { s.io.run(); });
  if (!s.config.render_to.empty()) s.writer_thread = std::thread([&s] { s.writer_loop(); });
  s.render_thread = std::thread([&s] { s.render_loop(); });
  s.regen->request_table(s.config.initial_table);
  return port;
}

void SynthService::wait() {
  Impl& s = *impl_;
  if (!s.started) throw Error("service not started");
  {
    std::unique_lock lock(s.stop_mu);
    s.stop_cv.wait(lock, [&] { return s.stop_requested; });
  }
  s.shutdown();
}

void SynthService::stop() { impl_->request_stop(); }

Engine& SynthService::engine() {
  if (!impl_->engine) throw Error("service not started");
  return *impl_->engine;
}

Regenerator& SynthService::regenerator() {
  if (!impl_->regen) throw Error("service not started");
  return *impl_->regen;
}

ServiceStats SynthService::stats() const {
  const Impl& s = *impl_;
  return {s.frames_rendered.load(), s.frames_written.load(), s.frames_dropped.load(),
          s.regen ? s.regen->completed() : s.regenerations};
}

}  // namespace wtcvae::synth
