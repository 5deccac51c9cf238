#include <algorithm>
#include <string>
#include <vector>

#include "ovtad/splits.hpp"

namespace ovtad {

namespace {

// Spellings follow the public annotation release verbatim, typos included
// ("Plataform diving", "Mooping floor", "Polishing forniture").
const char* const kActivityNetLabels[] = {
    "Applying sunscreen",
    "Archery",
    "Arm wrestling",
    "Assembling bicycle",
    "BMX",
    "Baking cookies",
    "Ballet",
    "Bathing dog",
    "Baton twirling",
    "Beach soccer",
    "Beer pong",
    "Belly dance",
    "Blow-drying hair",
    "Blowing leaves",
    "Braiding hair",
    "Breakdancing",
    "Brushing hair",
    "Brushing teeth",
    "Building sandcastles",
    "Bullfighting",
    "Bungee jumping",
    "Calf roping",
    "Camel ride",
    "Canoeing",
    "Capoeira",
    "Carving jack-o-lanterns",
    "Changing car wheel",
    "Cheerleading",
    "Chopping wood",
    "Clean and jerk",
    "Cleaning shoes",
    "Cleaning sink",
    "Cleaning windows",
    "Clipping cat claws",
    "Cricket",
    "Croquet",
    "Cumbia",
    "Curling",
    "Cutting the grass",
    "Decorating the Christmas tree",
    "Disc dog",
    "Discus throw",
    "Dodgeball",
    "Doing a powerbomb",
    "Doing crunches",
    "Doing fencing",
    "Doing karate",
    "Doing kickboxing",
    "Doing motocross",
    "Doing nails",
    "Doing step aerobics",
    "Drinking beer",
    "Drinking coffee",
    "Drum corps",
    "Elliptical trainer",
    "Fixing bicycle",
    "Fixing the roof",
    "Fun sliding down",
    "Futsal",
    "Gargling mouthwash",
    "Getting a haircut",
    "Getting a piercing",
    "Getting a tattoo",
    "Grooming dog",
    "Grooming horse",
    "Hammer throw",
    "Hand car wash",
    "Hand washing clothes",
    "Hanging wallpaper",
    "Having an ice cream",
    "High jump",
    "Hitting a pinata",
    "Hopscotch",
    "Horseback riding",
    "Hula hoop",
    "Hurling",
    "Ice fishing",
    "Installing carpet",
    "Ironing clothes",
    "Javelin throw",
    "Kayaking",
    "Kite flying",
    "Kneeling",
    "Knitting",
    "Laying tile",
    "Layup drill in basketball",
    "Long jump",
    "Longboarding",
    "Making a cake",
    "Making a lemonade",
    "Making a sandwich",
    "Making an omelette",
    "Mixing drinks",
    "Mooping floor",
    "Mowing the lawn",
    "Paintball",
    "Painting",
    "Painting fence",
    "Painting furniture",
    "Peeling potatoes",
    "Ping-pong",
    "Plastering",
    "Plataform diving",
    "Playing accordion",
    "Playing badminton",
    "Playing bagpipes",
    "Playing beach volleyball",
    "Playing blackjack",
    "Playing congas",
    "Playing drums",
    "Playing field hockey",
    "Playing flauta",
    "Playing guitarra",
    "Playing harmonica",
    "Playing ice hockey",
    "Playing kickball",
    "Playing lacrosse",
    "Playing piano",
    "Playing polo",
    "Playing pool",
    "Playing racquetball",
    "Playing rubik cube",
    "Playing saxophone",
    "Playing squash",
    "Playing ten pins",
    "Playing violin",
    "Playing water polo",
    "Pole vault",
    "Polishing forniture",
    "Polishing shoes",
    "Powerbocking",
    "Preparing pasta",
    "Preparing salad",
    "Putting in contact lenses",
    "Putting on makeup",
    "Putting on shoes",
    "Rafting",
    "Raking leaves",
    "Removing curlers",
    "Removing ice from car",
    "Riding bumper cars",
    "River tubing",
    "Rock climbing",
    "Rock-paper-scissors",
    "Rollerblading",
    "Roof shingle removal",
    "Rope skipping",
    "Running a marathon",
    "Sailing",
    "Scuba diving",
    "Sharpening knives",
    "Shaving",
    "Shaving legs",
    "Shot put",
    "Shoveling snow",
    "Shuffleboard",
    "Skateboarding",
    "Skiing",
    "Slacklining",
    "Smoking a cigarette",
    "Smoking hookah",
    "Snatch",
    "Snow tubing",
    "Snowboarding",
    "Spinning",
    "Spread mulch",
    "Springboard diving",
    "Starting a campfire",
    "Sumo",
    "Surfing",
    "Swimming",
    "Swinging at the playground",
    "Table soccer",
    "Tai chi",
    "Tango",
    "Tennis serve with ball bouncing",
    "Throwing darts",
    "Trimming branches or hedges",
    "Triple jump",
    "Tug of war",
    "Tumbling",
    "Using parallel bars",
    "Using the balance beam",
    "Using the monkey bar",
    "Using the pommel horse",
    "Using the rowing machine",
    "Using uneven bars",
    "Vacuuming floor",
    "Volleyball",
    "Wakeboarding",
    "Walking the dog",
    "Washing dishes",
    "Washing face",
    "Washing hands",
    "Waterskiing",
    "Waxing skis",
    "Welding",
    "Windsurfing",
    "Wrapping presents",
    "Zumba",
};

const char* const kSmartEvalLabels[] = {
    "Shot put",
    "Hammer throw",
    "Long jump",
    "Smoking a cigarette",
    "Spinning",
    "High jump",
    "Vacuuming floor",
    "Using the pommel horse",
    "Camel ride",
    "Playing racquetball",
    "Hurling",
    "Playing ice hockey",
    "Kayaking",
    "Wakeboarding",
    "Rafting",
    "Longboarding",
    "Assembling bicycle",
    "Zumba",
    "Belly dance",
    "Painting furniture",
    "Playing accordion",
    "Playing flauta",
    "Playing violin",
    "Tennis serve with ball bouncing",
    "Skiing",
    "Playing congas",
    "Drum corps",
    "Futsal",
    "Playing beach volleyball",
    "Doing karate",
    "Playing badminton",
    "Getting a haircut",
    "Playing kickball",
    "Doing motocross",
    "Cutting the grass",
    "Making an omelette",
    "Preparing salad",
    "Grooming horse",
    "Washing face",
    "Blowing leaves",
    "Shaving legs",
    "Plataform diving",
    "Polishing shoes",
    "Mixing drinks",
    "Painting fence",
    "Roof shingle removal",
    "Clipping cat claws",
    "Windsurfing",
    "River tubing",
    "Waterskiing",
};

std::vector<std::string> sorted_copy(const char* const* first, const char* const* last) {
  std::vector<std::string> out(first, last);
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

const std::vector<std::string>& activitynet_vocabulary() {
  static const std::vector<std::string> labels =
      sorted_copy(std::begin(kActivityNetLabels), std::end(kActivityNetLabels));
  return labels;
}

const std::vector<std::string>& activitynet_smart_eval_labels() {
  static const std::vector<std::string> labels =
      sorted_copy(std::begin(kSmartEvalLabels), std::end(kSmartEvalLabels));
  return labels;
}

LabelSplit activitynet_smart_split() {
  const auto& vocab = activitynet_vocabulary();
  const auto& eval = activitynet_smart_eval_labels();
  std::vector<std::string> train;
  std::set_difference(vocab.begin(), vocab.end(), eval.begin(), eval.end(),
                      std::back_inserter(train));
  SplitProvenance prov;
  prov.kind = SplitProvenance::Kind::smart;
  return make_split("activitynet-smart-75-25", std::move(train), eval, std::move(prov));
}

}  // namespace ovtad
