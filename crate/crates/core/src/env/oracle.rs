use alloc::format;

use super::question::{Answer, Question, SpatialPredicate, Template};
use super::scene::{Scene, NUM_ATTRIBUTES};
use crate::error::{Error, Result};

fn compare(value: f64, boundary: f64, below: Answer) -> Answer {
    if value == boundary {
        Answer::NotApplicable
    } else if (value < boundary) == (below == Answer::Yes) {
        Answer::Yes
    } else {
        Answer::No
    }
}

fn middle_band(value: f64, extent: f64) -> Answer {
    let (lo, hi) = (extent / 3.0, 2.0 * extent / 3.0);
    if value == lo || value == hi {
        Answer::NotApplicable
    } else if value > lo && value < hi {
        Answer::Yes
    } else {
        Answer::No
    }
}

/// Truthful answer of `template` about object `index`.
///
/// Spatial predicates use the box centre; a centre lying exactly on a band
/// boundary makes the predicate undefined and yields NA.
pub fn evaluate_template(scene: &Scene, index: usize, template: &Template) -> Result<Answer> {
    let object = scene
        .objects
        .get(index)
        .ok_or_else(|| Error::Contract(format!("object index {index} out of {}", scene.len())))?;
    let yes_no = |b: bool| if b { Answer::Yes } else { Answer::No };
    Ok(match *template {
        Template::Category(k) => yes_no(object.category_id == k),
        Template::Attribute(a) if a < NUM_ATTRIBUTES => yes_no(object.attribute_ids.contains(&a)),
        Template::Attribute(a) => return Err(Error::Protocol(format!("unknown attribute template {a}"))),
        Template::Spatial(p) => {
            let (xc, yc) = object.center();
            match p {
                SpatialPredicate::LeftHalf => compare(xc, scene.width / 2.0, Answer::Yes),
                SpatialPredicate::RightHalf => compare(xc, scene.width / 2.0, Answer::No),
                SpatialPredicate::TopHalf => compare(yc, scene.height / 2.0, Answer::Yes),
                SpatialPredicate::BottomHalf => compare(yc, scene.height / 2.0, Answer::No),
                SpatialPredicate::MiddleColumn => middle_band(xc, scene.width),
                SpatialPredicate::MiddleRow => middle_band(yc, scene.height),
            }
        }
        Template::FreeText => return Err(Error::Protocol("free-text question cannot be answered".into())),
    })
}

/// The rule-based Oracle: answers `question` truthfully about the target.
pub fn oracle_answer(scene: &Scene, target_index: usize, question: &Question) -> Result<Answer> {
    evaluate_template(scene, target_index, &question.template)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::question::{Vocabulary, CATEGORY_NAMES};
    use crate::env::scene::SceneObject;

    fn scene_with(objects: alloc::vec::Vec<SceneObject>) -> Scene {
        Scene { width: 200.0, height: 100.0, objects }
    }

    fn obj(category: usize, bbox: [f64; 4]) -> SceneObject {
        SceneObject { category_id: category, bbox, attribute_ids: alloc::vec![category % 4, 5] }
    }

    #[test]
    fn category_question_about_a_cow() {
        let cow = CATEGORY_NAMES.iter().position(|n| *n == "cow").unwrap();
        let s = scene_with(alloc::vec![obj(cow, [10.0, 10.0, 20.0, 20.0]), obj(0, [100.0, 10.0, 20.0, 20.0]), obj(1, [150.0, 50.0, 20.0, 20.0])]);
        let q = Question::from_template(Template::Category(cow), &Vocabulary::standard()).unwrap();
        assert_eq!(oracle_answer(&s, 0, &q).unwrap(), Answer::Yes);
        assert_eq!(oracle_answer(&s, 1, &q).unwrap(), Answer::No);
    }

    #[test]
    fn right_side_target_is_not_in_left_half() {
        // x_center = 0.9 · width
        let s = scene_with(alloc::vec![obj(0, [170.0, 10.0, 20.0, 20.0]), obj(1, [0.0, 0.0, 10.0, 10.0]), obj(2, [50.0, 0.0, 10.0, 10.0])]);
        let q = Question::from_template(Template::Spatial(SpatialPredicate::LeftHalf), &Vocabulary::standard()).unwrap();
        assert_eq!(oracle_answer(&s, 0, &q).unwrap(), Answer::No);
    }

    #[test]
    fn centre_on_boundary_is_not_applicable() {
        let s = scene_with(alloc::vec![obj(0, [90.0, 10.0, 20.0, 20.0]), obj(1, [0.0, 0.0, 10.0, 10.0]), obj(2, [50.0, 0.0, 10.0, 10.0])]);
        let t = Template::Spatial(SpatialPredicate::LeftHalf);
        assert_eq!(evaluate_template(&s, 0, &t).unwrap(), Answer::NotApplicable);
    }

    #[test]
    fn free_text_is_a_protocol_error() {
        let s = scene_with(alloc::vec![obj(0, [0.0, 0.0, 1.0, 1.0]), obj(0, [2.0, 0.0, 1.0, 1.0]), obj(0, [4.0, 0.0, 1.0, 1.0])]);
        assert!(matches!(evaluate_template(&s, 0, &Template::FreeText), Err(Error::Protocol(_))));
        assert!(matches!(evaluate_template(&s, 0, &Template::Attribute(99)), Err(Error::Protocol(_))));
    }
}
