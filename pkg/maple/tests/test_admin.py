from django.contrib.auth import get_user_model
from django.test import TestCase
from django.urls import reverse

from maple.models import TrainingRun


class RunRegistryAdminTests(TestCase):

    def setUp(self):
        user = get_user_model().objects.create_superuser('admin', 'admin@example.com', 'password')
        self.client.force_login(user)
        self.run = TrainingRun.objects.create(task='lift', method='maple', seed=0, out_dir='runs/lift0',
                                              status='completed', final_success_rate=0.5)
        self.run.evaluations.create(env_steps=10_000, return_norm=40.0, success_rate=0.5,
                                    alpha_tsk=0.1, alpha_p=0.01, usage={'grasp': 0.5, 'release': 0.5})

    def test_changelist_shows_success(self):
        response = self.client.get(reverse('admin:maple_trainingrun_changelist'))
        self.assertEqual(response.status_code, 200)
        self.assertContains(response, '50%')

    def test_change_page_lists_evaluations(self):
        response = self.client.get(reverse('admin:maple_trainingrun_change', args=[self.run.pk]))
        self.assertEqual(response.status_code, 200)
        self.assertContains(response, '10000')

    def test_runs_cannot_be_added_by_hand(self):
        response = self.client.get(reverse('admin:maple_trainingrun_add'))
        self.assertEqual(response.status_code, 403)

    def test_latest_evaluation(self):
        self.run.evaluations.create(env_steps=20_000, return_norm=60.0, success_rate=0.75,
                                    alpha_tsk=0.1, alpha_p=0.01)
        self.assertEqual(self.run.latest_evaluation.success_rate, 0.75)
        self.assertIn('lift', str(self.run))
